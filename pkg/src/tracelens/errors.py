"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (used on the CLI's
``error: <code>: <detail>`` lines) and an ``exit_status``: 2 for problems
with what the user asked for, 1 for problems with the data itself.
"""


class TracelensError(Exception):
    code = "error"
    exit_status = 1

    def __init__(self, detail=""):
        super().__init__(detail)
        self.detail = detail


class ConfigError(TracelensError):
    code = "config"
    exit_status = 2


class MalformedNodeId(ConfigError):
    code = "malformed-node-id"


class UnknownNode(ConfigError):
    code = "unknown-node"


class UnknownRack(ConfigError):
    code = "unknown-rack"


class OverlappingPeriods(ConfigError):
    code = "overlapping-periods"


class InvalidPeriod(ConfigError):
    code = "invalid-period"


class CatalogConflict(ConfigError):
    code = "catalog-conflict"


class CatalogCorrupt(ConfigError):
    code = "catalog-corrupt"


class BadEnvelope(TracelensError):
    code = "bad-envelope"


class StoreCorrupt(TracelensError):
    code = "store-corrupt"


class MixedMetrics(TracelensError):
    code = "mixed-metrics"


class EmptyInput(TracelensError):
    code = "empty-input"


class DegenerateDistribution(TracelensError):
    code = "degenerate-distribution"


class WrongGrouping(TracelensError):
    code = "wrong-grouping"


class EmptySpec(TracelensError):
    code = "empty-spec"


class PayloadMismatch(TracelensError):
    code = "payload-mismatch"


class RaggedRows(TracelensError):
    code = "ragged-rows"


class EmptyPeriodWarning(UserWarning):
    """One side of a period split received no samples."""
