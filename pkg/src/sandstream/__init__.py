"""Hybrid-control sandbox sessions streamed over an adaptive tile protocol.

The package is organised around the service stack:

- ``session``: session lifecycle, control arbitration, scoped tokens.
- ``env``: deterministic simulated desktop (scenes, virtual fs, egress policy).
- ``codec``: dirty-region detection, content classification, tile codecs.
- ``transport``: wire framing, multi-channel endpoint, rate control.
- ``netsim``: seeded network-condition emulator.
- ``gateway`` / ``server``: the JSON control plane and stream bridge.
- ``driver``: scripted agent task policies (agent-only vs hybrid).
- ``bench``: end-to-end benchmark harness and metrics.
"""

__version__ = "0.1.0"
