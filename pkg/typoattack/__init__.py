"""
Typographic attack benchmark toolkit: генерация типографических атак,
сборка манифестов, оценка vision-language моделей и отчеты ACC/ACC-/GAP
"""

__version__ = "0.1.0"
