from .wire import (
    CHANNEL_PRIORITY,
    DATAGRAM_BUDGET,
    FLAG_ACK,
    FLAG_KEYFRAME,
    FLAG_KEYFRAME_REQUEST,
    FLAG_RELIABLE,
    HEADER_SIZE,
    MAX_PAYLOAD,
    Channel,
    WireFrame,
    frame_pack,
    frame_unpack,
    is_reliable_channel,
)
from .rate import BandwidthEstimate, congestion_update, estimate_bandwidth
from .endpoint import Delivery, Endpoint, EndpointConfig, JitterBuffer

__all__ = [
    "BandwidthEstimate",
    "CHANNEL_PRIORITY",
    "Channel",
    "DATAGRAM_BUDGET",
    "Delivery",
    "Endpoint",
    "EndpointConfig",
    "FLAG_ACK",
    "FLAG_KEYFRAME",
    "FLAG_KEYFRAME_REQUEST",
    "FLAG_RELIABLE",
    "HEADER_SIZE",
    "JitterBuffer",
    "MAX_PAYLOAD",
    "WireFrame",
    "congestion_update",
    "estimate_bandwidth",
    "frame_pack",
    "frame_unpack",
    "is_reliable_channel",
]
