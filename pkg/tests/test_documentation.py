import pathlib

import pytest
import rstcheck

from altphillips.cli import COMMANDS

README = pathlib.Path(__file__).parent.resolve().parent / "README.rst"


@pytest.fixture
def readme() -> str:
    with README.open(encoding="utf-8") as f:
        return f.read()


def test_readme_is_proper_rst(readme):
    errors = [str(e) for e in list(rstcheck.check(readme))]
    # https://github.com/rstcheck/rstcheck-core/issues/4
    errors = [s for s in errors if not ("Hyperlink target" in s and "is not referenced." in s)]
    assert len(errors) == 0, "; ".join(errors)


@pytest.mark.parametrize("command", COMMANDS)
def test_readme_lists_every_subcommand(readme, command):
    assert f"``{command}``" in readme


def test_readme_names_presets_and_exit_codes(readme):
    for name in ("chord", "halfplane", "phi-right", "identities"):
        assert f"``{name}``" in readme
    assert "2 on configuration errors and 3 on numerical failures" in readme
