#!/usr/bin/env python3
"""
Tests for environment settings, config files and error descriptions.
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import json

import pytest

from src.config import load_config, load_settings, merge_options
from src.errors import ERROR_CODES, ConfigError, KViolation, NotSquarefree, describe_error


def test_default_settings(monkeypatch):
    for name in ('COKLAB_THREADS', 'COKLAB_CHUNK_SIZE', 'COKLAB_SUR_CAP', 'COKLAB_LOG_LEVEL'):
        monkeypatch.delenv(name, raising=False)
    settings = load_settings()
    assert settings.threads == (os.cpu_count() or 1)
    assert settings.sur_cap_exponent == 8
    assert settings.chunk_size == 2000
    assert settings.log_level == 'INFO'


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv('COKLAB_THREADS', '3')
    monkeypatch.setenv('COKLAB_LOG_LEVEL', 'debug')
    settings = load_settings()
    assert settings.threads == 3
    assert settings.log_level == 'DEBUG'


@pytest.mark.parametrize("name,value", [
    ('COKLAB_THREADS', '0'),
    ('COKLAB_THREADS', 'many'),
    ('COKLAB_CHUNK_SIZE', '-5'),
    ('COKLAB_LOG_LEVEL', 'LOUD'),
])
def test_bad_settings(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ConfigError):
        load_settings()


def test_config_file(tmp_path):
    assert load_config(str(tmp_path / "missing.json")) == {}
    good = tmp_path / "config.json"
    good.write_text(json.dumps({'samples': 50, 'seed': 4}))
    assert load_config(str(good)) == {'samples': 50, 'seed': 4}
    bad = tmp_path / "bad.json"
    bad.write_text("{samples: ")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_cli_options_override_file():
    merged = merge_options({'samples': 10, 'seed': None}, {'samples': 50, 'seed': 4})
    assert merged == {'samples': 10, 'seed': 4}


def test_error_codes():
    assert len(ERROR_CODES) == 14
    error = NotSquarefree("pass --module")
    assert error.code == 'E004'
    assert describe_error(error) == "ERROR E004: Polynomial Not Square-free - pass --module"
    assert describe_error(KViolation()) == "ERROR E007: Working Precision Too Small"
