"""In-process simulation of range-sharded document storage behind failover routers."""
from vre.errors import VreError


class MissingShardKey(VreError):
    pass


class NoLiveRouter(VreError):
    pass


class InvalidSplitPoint(VreError):
    pass


class ClusterSpecError(VreError):
    pass


class RouterDown(VreError):
    """Raised to the client when the router it talked to died; the request may or may not have been applied."""
