import pytest

from typoattack.config import (
    DEFAULT_SEED, RunConfig, adapt_defaults_for_hardware, build_run_config, load_yaml_config,
)
from typoattack.errors import ConfigError

HARDWARE = {'cpu': {'cores': 2, 'threads': 4}}


@pytest.fixture
def isolated(tmp_path, clean_env):
    clean_env.chdir(tmp_path)
    return clean_env


def test_defaults(isolated):
    config = build_run_config('eval', {}, hardware=HARDWARE)
    assert config.seed == DEFAULT_SEED
    assert config.prompt_id == "BASE"
    assert config.command == 'eval'
    assert (config.workers, config.max_in_flight) == (3, 8)


@pytest.mark.parametrize("threads,expected", [(1, (1, 2)), (4, (3, 8)), (64, (8, 16))])
def test_hardware_defaults_are_clamped(threads, expected):
    values = adapt_defaults_for_hardware({'cpu': {'threads': threads}})
    assert (values['workers'], values['max_in_flight']) == expected


def test_layer_precedence(isolated, tmp_path):
    isolated.setenv('TYPO_SEED', '5')
    isolated.setenv('TYPO_MODEL', 'env-model')
    assert build_run_config('eval', {}, hardware=HARDWARE).seed == 5

    config_path = tmp_path / "run.yaml"
    config_path.write_text("seed: 6\nmax_in_flight: 3\nmock: 'yes'\n", encoding="utf-8")
    config = build_run_config('eval', {}, str(config_path), hardware=HARDWARE)
    assert config.seed == 6
    assert config.max_in_flight == 3
    assert config.mock is True
    assert config.model_name == 'env-model'

    config = build_run_config('eval', {'seed': 7, 'mock': None}, str(config_path), hardware=HARDWARE)
    assert config.seed == 7
    assert config.mock is True


def test_env_file_is_read(isolated, tmp_path):
    env_file = tmp_path / "custom.env"
    env_file.write_text("TYPO_BASE_URL=http://gpu-box:9000/v1\nTYPO_MAX_IN_FLIGHT=12\n", encoding="utf-8")
    config = build_run_config('eval', {}, env_file=str(env_file), hardware=HARDWARE)
    assert config.base_url == "http://gpu-box:9000/v1"
    assert config.max_in_flight == 12


def test_unknown_yaml_key(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("seed: 1\nbatch_size: 8\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="batch_size"):
        load_yaml_config(str(path))


def test_bad_yaml_values(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("seed: many\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_yaml_config(str(path))
    with pytest.raises(ConfigError):
        load_yaml_config(str(tmp_path / "missing.yaml"))


def test_validate_collects_all_errors():
    config = RunConfig(command='eval', seed=-1, max_in_flight=0, prompt_id='P9', base_url='ftp://x')
    with pytest.raises(ConfigError) as excinfo:
        config.validate()
    message = str(excinfo.value)
    assert len(message.splitlines()) >= 5
    assert "P9" in message
    assert "манифест" in message


def test_unknown_scale(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text("", encoding="utf-8")
    RunConfig(command='generate', corpus=str(corpus), scale='L').validate()
    with pytest.raises(ConfigError, match="XL"):
        RunConfig(command='generate', corpus=str(corpus), scale='XL').validate()


def test_option_scores_replace_records(tmp_path):
    scores = tmp_path / "scores.jsonl"
    scores.write_text("", encoding="utf-8")
    RunConfig(command='report', option_scores=str(scores)).validate()
    with pytest.raises(ConfigError, match="оценки текстовых опций"):
        RunConfig(command='report', option_scores=str(tmp_path / "nope.jsonl")).validate()


def test_mock_skips_endpoint_checks(tmp_path):
    manifest = tmp_path / "m.jsonl"
    manifest.write_text("", encoding="utf-8")
    RunConfig(command='eval', mock=True, base_url='', manifest=str(manifest)).validate()


def test_token_is_hidden():
    config = RunConfig(api_token="tok-123456")
    assert "tok-123456" not in repr(config)
    assert config.to_public_dict()['api_token'] == '***'
    assert "tok-123456" not in repr(config.endpoint())
    assert config.endpoint().auth_token == "tok-123456"
