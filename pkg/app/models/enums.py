from enum import Enum
from typing import Tuple


class BaseStrEnum(str, Enum):
    def __new__(cls, value: str, label: str = None):
        obj = str.__new__(cls, value)
        obj._value_ = value
        obj._label_ = label or value
        return obj

    @property
    def label(self) -> str:
        return self._label_

    @classmethod
    def options(cls) -> list[Tuple[str, str]]:
        return [(member.value, member.label) for member in cls]


class GroupKind(BaseStrEnum):
    CYCLIC = "cyclic", "Cyclic group Z_n"
    DIHEDRAL = "dihedral", "Dihedral group D_n of order 2n"
    SYMMETRIC = "symmetric", "Symmetric group S_k of order k!"


class SddMode(BaseStrEnum):
    RANDOMIZED = "rand", "Column sampling"
    DETERMINISTIC = "det", "Spectral sparsification of CC^T"
    BARRIER = "bss", "Barrier reweighting of CC^T"


class CertifyMode(BaseStrEnum):
    ON = "on", "Certify by direct eigensolve"
    OFF = "off", "Skip certification"


class Subcommand(BaseStrEnum):
    BALANCE = "balance", "Matrix balancing game"
    CAYLEY = "cayley", "Expanding Cayley graph"
    ISOTROPIC = "isotropic", "Isotropic sparsification"
    SPECTRAL = "spectral", "Spectral sparsification of an outer-product sum"
    GRAPH = "graph", "Graph spectral sparsifier"
    ELEMENTWISE = "elementwise", "Element-wise sparsification"
    SDD = "sdd", "theta-SDD element-wise sparsification"
    VERIFY = "verify", "Identity and family checks"
