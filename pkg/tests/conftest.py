import pytest
from hypothesis import settings

import _QPLANE.resource.config as cfg
from _QPLANE import QPLANE_RESOURCE_DIR
from tests.strategies import preset_handle

cfg.initialize(f"{QPLANE_RESOURCE_DIR}/config", environment='default')
settings.register_profile('qplane', max_examples=cfg.read_int('tests', 'examples'), deadline=None)
settings.load_profile('qplane')


@pytest.fixture(scope='session')
def calc2a():
    return preset_handle('calc2a')


@pytest.fixture(scope='session')
def calc2b():
    return preset_handle('calc2b')


@pytest.fixture(scope='session')
def calc3a():
    return preset_handle('calc3a')


@pytest.fixture(scope='session')
def calc3a_two_thirds():
    return preset_handle('calc3a', '2/3')


@pytest.fixture(scope='session')
def calc3b():
    return preset_handle('calc3b')


@pytest.fixture(scope='session')
def outer():
    return preset_handle('outer')
