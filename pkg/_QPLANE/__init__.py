import os

QPLANE_RESOURCE_DIR = os.path.dirname(os.path.abspath(__file__))
