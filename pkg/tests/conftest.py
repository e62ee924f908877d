import stat
from pathlib import Path

import pytest

SAMPLE_PROGRAM = """\
sum = 0;
mul = 1;
a = input("a? ");
b = input("b? ");
while (a <= b) {
    sum = sum + a;
    mul = mul * a;
    a = a + 1;
}
print("sum = ", sum, "\\n");
print("mul = ", mul, "\\n");
"""


@pytest.fixture
def sample_source() -> str:
    return SAMPLE_PROGRAM


@pytest.fixture
def make_script(tmp_path):
    """Write an executable shell script and return its path."""

    counter = {"n": 0}

    def write(body: str) -> str:
        counter["n"] += 1
        path = tmp_path / f"script{counter['n']}.sh"
        path.write_text("#!/bin/sh\n" + body + "\n")
        path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
        return str(path)

    return write


@pytest.fixture
def workspace_root(tmp_path) -> Path:
    root = tmp_path / "workspaces"
    root.mkdir()
    return root
