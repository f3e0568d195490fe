import os
import shlex
import sys

import pytest

from dacomp import codec as codecs

MOCK = os.path.join(os.path.dirname(__file__), "mock_codec.py")


def mock_templates(mode):
    py = shlex.quote(sys.executable)
    script = shlex.quote(MOCK)
    return (f"{py} {script} encode {mode} {{q}} {{in}} {{out}}",
            f"{py} {script} decode {{in}} {{out}}")


def mock_codec(mode, **kwargs):
    enc, dec = mock_templates(mode)
    kwargs.setdefault("in_ext", "pgm")
    kwargs.setdefault("decoded_ext", "pgm")
    return codecs.external(enc, dec, **kwargs)


@pytest.fixture
def mock():
    return mock_codec
