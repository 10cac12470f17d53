import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir))
sys.path.insert(0, os.path.dirname(__file__))

from bpy_stub import FakeBpy


@pytest.fixture
def fake_bpy():
    return FakeBpy()
