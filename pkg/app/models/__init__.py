# ruff: noqa: F401 I001
from .enums import *  # noqa: F403
from .family import BalancingFamily, DenseFamily, SampleFamily
from .group import CayleyFamily, GeneratorMultiset, GroupTable
from .rows import DiagonalPlusRankOne, IsotropicFamily, RowFamily
from .outer import OuterProductSum, WeightVector
from .sdd import EntryDilationFamily, SddDecomposition, SparsifiedMatrix
