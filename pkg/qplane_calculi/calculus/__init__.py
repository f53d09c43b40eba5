from qplane_calculi.calculus.checks import *
from qplane_calculi.calculus.forms import *
from qplane_calculi.calculus.connection import *
