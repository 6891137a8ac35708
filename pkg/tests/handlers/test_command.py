import json

import pytest

from adiabatlab.errors import ConfigError
from adiabatlab.handlers.command import DRIVERS, CommandHandler


def test_default_config_is_created(tmp_path):
    path = tmp_path / "nested" / "commands.json"
    handler = CommandHandler(str(path))
    assert path.exists()
    assert set(handler.commands) == set(DRIVERS)
    for command in DRIVERS:
        handler.parameters(command)


def test_repository_commands_are_valid():
    handler = CommandHandler()
    assert set(handler.commands) == set(DRIVERS)
    for command in DRIVERS:
        handler.parameters(command)


def test_overrides_win(tmp_path):
    handler = CommandHandler(str(tmp_path / "commands.json"))
    params = handler.parameters("sweep", {"eta_grid": [0.1], "k": 1})
    assert params["eta_grid"] == [0.1]
    assert params["k"] == 1
    assert params["n"] == 1


def test_unknown_parameter_and_command(tmp_path):
    handler = CommandHandler(str(tmp_path / "commands.json"))
    with pytest.raises(ConfigError) as exc:
        handler.parameters("norms", {"eps_grid": [0.1]})
    assert exc.value.pointer == "/commands/norms/defaults"
    with pytest.raises(ConfigError):
        handler.parameters("dance")


def test_broken_files(tmp_path):
    path = tmp_path / "commands.json"
    path.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        CommandHandler(str(path))
    path.write_text(json.dumps({"commands": {"dance": {}}}), encoding="utf-8")
    with pytest.raises(ConfigError):
        CommandHandler(str(path))


def test_help_lists_every_command(tmp_path):
    text = CommandHandler(str(tmp_path / "commands.json")).generate_help()
    for command in DRIVERS:
        assert command in text
