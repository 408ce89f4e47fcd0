"""Schema-constrained model stages: cluster labelling and relation discovery."""

from .gateway import (
    DISCOVER_TEMPLATE,
    LABEL_TEMPLATE,
    ChatGateway,
    ChatRequest,
    GatewayError,
    HttpChatGateway,
    ScriptedMockGateway,
    fingerprint,
    scripted_mock_gateway,
)
from .schemas import (
    CATEGORIES,
    LabeledCluster,
    MarketRelation,
    MarketRelationList,
    SchemaError,
    SingleMarket,
    TransductionConfig,
    parse_label,
    parse_relation_list,
)
from .stages import (
    ErrorLog,
    canonicalize_relations,
    discover_all,
    discover_relations,
    label_cluster,
    label_clusters,
    load_template,
    render_discover_prompt,
    render_label_prompt,
)

__all__ = [
    "DISCOVER_TEMPLATE",
    "LABEL_TEMPLATE",
    "ChatGateway",
    "ChatRequest",
    "GatewayError",
    "HttpChatGateway",
    "ScriptedMockGateway",
    "fingerprint",
    "scripted_mock_gateway",
    "CATEGORIES",
    "LabeledCluster",
    "MarketRelation",
    "MarketRelationList",
    "SchemaError",
    "SingleMarket",
    "TransductionConfig",
    "parse_label",
    "parse_relation_list",
    "ErrorLog",
    "canonicalize_relations",
    "discover_all",
    "discover_relations",
    "label_cluster",
    "label_clusters",
    "load_template",
    "render_discover_prompt",
    "render_label_prompt",
]
