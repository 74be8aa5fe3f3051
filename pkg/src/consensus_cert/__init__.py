"""Runtime certification of consensus safety over a spanning tree.

Certification agents sit next to each node's consensus implementation and
check, one round at a time, that decisions agree and were proposed. During
start-up they also certify the spanning tree they communicate over and the
uniqueness of node IDs. A deterministic simulator drives the agents through
correct and buggy runs, with fail-stop faults.
"""

from .consensus import ConsensusInput
from .harness import Classification, Report, run_scenario
from .kernels import BACKEND
from .simnet import SimConfig
from .types import ErrorKind, ErrorSignal, TreeInput
from .uniqueness import Mode
from .workload import Bug, BugKind, Scenario, random_scenario

__all__ = [
    "BACKEND",
    "Bug",
    "BugKind",
    "Classification",
    "ConsensusInput",
    "ErrorKind",
    "ErrorSignal",
    "Mode",
    "Report",
    "Scenario",
    "SimConfig",
    "TreeInput",
    "random_scenario",
    "run_scenario",
]
