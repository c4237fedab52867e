"""Dataflow intermediate representation."""

from .deploy import (
    ChannelSpec,
    Deployment,
    Endpoint,
    FunctionalDependency,
    NodeSpec,
    deployment_from_dict,
    deployments_isomorphic,
    dump_deployment,
    freeze_env,
    load_deployment,
    single_node,
    validate_deployment,
)
from .dsl import ParseError, parse_dsl, serialize_graph
from .graph import (
    KINDS,
    ArityError,
    DataflowGraph,
    Diagnostic,
    Edge,
    IRError,
    OperatorNode,
    UnknownOperator,
    graphs_isomorphic,
    validate_graph,
)
