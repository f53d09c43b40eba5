import os

QPLANE_DIR = os.path.dirname(os.path.abspath(__file__))

__version__ = '1.0'
