"""Exception types shared across the package.

Blow-up of a flow is *not* an error (it is a terminal run status); these
exceptions cover genuinely invalid inputs or unusable data.
"""


class RicciLabError(Exception):
    pass


class DegenerateMetricError(RicciLabError):
    """Metric lost positive-definiteness at a node (det g <= 1e-12 or g_xx <= 0)."""

    def __init__(self, node, det):
        self.node = tuple(int(k) for k in node)
        self.det = float(det)
        super().__init__(f"metric degenerate at node {self.node}: det g = {self.det:g}")


class OracleInapplicableError(RicciLabError):
    pass


class UnreliableOracleError(RicciLabError):
    pass


class InvalidSubsolutionError(RicciLabError):
    pass


class InvalidCycleError(RicciLabError):
    pass


class ProbeOrderError(RicciLabError):
    """Cohomology probe pairs to <= 0 with its cycle; the loop-length bound needs a
    class of infinite order."""


class DomainTooSmallError(RicciLabError):
    pass


class IncompleteTrajectoryError(RicciLabError):
    pass


class ScenarioError(RicciLabError):
    """Carries every validation problem found in a scenario, not just the first."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
