import pytest

from senskit.data import fixture_dataset


@pytest.fixture(scope="session")
def table3():
    return fixture_dataset("petn_table3")


@pytest.fixture(scope="session")
def table4():
    return fixture_dataset("petn_table4")


@pytest.fixture(scope="session")
def table5():
    return fixture_dataset("petn_table5")


@pytest.fixture(scope="session")
def table6():
    return fixture_dataset("petn_table6")
