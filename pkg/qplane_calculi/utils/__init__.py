from qplane_calculi.utils.errors import *
from qplane_calculi.utils.scalars import *
from qplane_calculi.utils.algebra import *
