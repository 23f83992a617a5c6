import pytest

from typoattack.errors import InvalidFactor
from typoattack.factors import (
    COLOR_NAMES, GRID_CELLS, PALETTE, Axis, FactorConfig, GridCell, axis_of_tag, axis_values,
    color_rgb, setting_label, sweep_configs, variant_tag,
)


def test_palette_has_23_colors_in_table_order():
    assert len(PALETTE) == 23
    assert COLOR_NAMES[:7] == ('red', 'orange', 'yellow', 'green', 'cyan', 'blue', 'purple')
    assert COLOR_NAMES[7] == 'dred'
    assert COLOR_NAMES[14] == 'lred'
    assert COLOR_NAMES[-2:] == ('white', 'black')


def test_light_and_dark_are_midpoints_rounded_up():
    assert color_rgb('lred') == (255, 128, 128)
    assert color_rgb('dred') == (128, 0, 0)
    assert color_rgb('lgreen') == (128, 192, 128)
    assert color_rgb('dpurple') == (64, 0, 64)


def test_unknown_color_is_invalid_factor():
    with pytest.raises(InvalidFactor):
        color_rgb('magenta')


def test_grid_cells_row_major_and_named():
    assert len(GRID_CELLS) == 16
    assert GRID_CELLS[0].name == 'R1C1'
    assert GRID_CELLS[5].name == 'R2C2'
    assert all(GridCell.parse(cell.name) == cell for cell in GRID_CELLS)


@pytest.mark.parametrize("row,col", [(0, 1), (5, 1), (1, 0), (1, 5)])
def test_grid_cell_out_of_range(row, col):
    with pytest.raises(InvalidFactor):
        GridCell(row, col)


@pytest.mark.parametrize("name", ["R2", "X1C1", "RaCb", ""])
def test_grid_cell_bad_name(name):
    with pytest.raises(InvalidFactor):
        GridCell.parse(name)


def test_fixed_configuration():
    fixed = FactorConfig.fixed()
    assert (fixed.font_size_px, fixed.opacity_percent, fixed.color, fixed.cell.name) == (15, 100, 'white', 'R2C2')
    assert fixed.rgb == (255, 255, 255)
    assert FactorConfig.from_dict(fixed.to_dict()) == fixed


@pytest.mark.parametrize("kwargs", [
    dict(font_size_px=7, opacity_percent=100, color='white'),
    dict(font_size_px=15, opacity_percent=25, color='white'),
    dict(font_size_px=15, opacity_percent=100, color='teal'),
])
def test_factor_config_rejects_values_outside_sets(kwargs):
    with pytest.raises(InvalidFactor):
        FactorConfig(cell=GridCell(2, 2), **kwargs)


@pytest.mark.parametrize("axis,count", [
    (Axis.FONT_SIZE, 5), (Axis.OPACITY, 5), (Axis.COLOR, 23), (Axis.POSITION, 16),
])
def test_sweep_sizes_and_fixed_remainder(axis, count):
    configs = sweep_configs(axis)
    assert len(configs) == count
    fixed = FactorConfig.fixed()
    for _, config in configs:
        if axis is not Axis.FONT_SIZE:
            assert config.font_size_px == fixed.font_size_px
        if axis is not Axis.OPACITY:
            assert config.opacity_percent == fixed.opacity_percent
        if axis is not Axis.COLOR:
            assert config.color == fixed.color
        if axis is not Axis.POSITION:
            assert config.cell == fixed.cell


def test_variant_tags_and_labels():
    assert variant_tag(Axis.FONT_SIZE, 6) == 'FS-6px'
    assert variant_tag(Axis.OPACITY, 20) == 'FO-20'
    assert variant_tag(Axis.COLOR, 'lred') == 'FC-lred'
    assert variant_tag(Axis.POSITION, GridCell(1, 1)) == 'FP-R1C1'
    assert setting_label(Axis.FONT_SIZE, 3) == '3px'
    assert setting_label(Axis.OPACITY, 40) == '40%'
    assert axis_of_tag('FC-lred') is Axis.COLOR
    assert axis_of_tag('FIXED') is None
    assert axis_of_tag('WTYPO') is None


def test_axis_parse_aliases():
    assert Axis.parse('fs') is Axis.FONT_SIZE
    assert Axis.parse('Font-Size') is Axis.FONT_SIZE
    assert Axis.parse('colour') is Axis.COLOR
    assert Axis.parse('FP') is Axis.POSITION
    assert Axis.COLOR.display_name == 'Font Color'
    assert axis_values(Axis.OPACITY) == [20, 40, 60, 80, 100]
    with pytest.raises(InvalidFactor):
        Axis.parse('rotation')
