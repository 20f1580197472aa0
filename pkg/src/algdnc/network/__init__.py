"""Network model, generators and file format."""

from algdnc.network.generators import (
    AfdxParams,
    GlpParams,
    afdx_generate,
    device_to_server_graph,
    feed_forwardize,
    glp_generate,
    glp_network,
    route_flows,
)
from algdnc.network.io import dumps, load_network, loads, save_network
from algdnc.network.model import DeviceGraph, Flow, Network, ServerGraph, tandem_network

__all__ = [
    "AfdxParams",
    "DeviceGraph",
    "Flow",
    "GlpParams",
    "Network",
    "ServerGraph",
    "afdx_generate",
    "device_to_server_graph",
    "dumps",
    "feed_forwardize",
    "glp_generate",
    "glp_network",
    "load_network",
    "loads",
    "route_flows",
    "save_network",
    "tandem_network",
]
