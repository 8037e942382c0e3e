from .model import Dataset, DrlrConfig, Solution, Status, SubproblemInstance
from .outer import golden_section_solve
from .lpadmm import solve_subproblem

__version__ = "0.1.0"
