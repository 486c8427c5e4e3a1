import pytest

from sbcheck import models
from sbcheck.flatten import build_flat
from sbcheck.kripke import to_kripke


@pytest.fixture(scope="session")
def atv_s0():
    return models.load("atv_s0")


@pytest.fixture(scope="session")
def atv_s1():
    return models.load("atv_s1")


@pytest.fixture(scope="session")
def bone_s0():
    return models.load("bone_s0")


@pytest.fixture(scope="session")
def bone_s1():
    return models.load("bone_s1")


@pytest.fixture(scope="session")
def bundled(atv_s0, atv_s1, bone_s0, bone_s1):
    return {"atv_s0": atv_s0, "atv_s1": atv_s1,
            "bone_s0": bone_s0, "bone_s1": bone_s1}


@pytest.fixture(scope="session")
def flats(bundled):
    return {name: build_flat(sys_) for name, sys_ in bundled.items()}


@pytest.fixture(scope="session")
def kripkes(flats):
    return {name: to_kripke(flat) for name, flat in flats.items()}
