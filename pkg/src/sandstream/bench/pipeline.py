"""End-to-end benchmark pipeline on the simulated clock.

One run drives scene -> encoder -> transport -> network emulator -> decoder
-> client presents, entirely on simulated time, and is deterministic per
(scene, protocol, preset, duration, seed).

Two protocols share the identical transport and emulator path:

* ``asp``: dirty regions, per-class codecs, controller/network adaptation,
  keyframe-on-join over the reliable channel, frame markers on the
  highest-priority reliable lane, and intra-wave recovery on request.
* ``baseline``: a full-frame fixed-quality (80) encode of every frame,
  shipped as unreliable fragments with no dirty regions, no classification
  and no adaptation; a frame presents only when every fragment of its
  bundle survives.

Reported bandwidth counts every downstream datagram offered to the link
(including retransmissions) over the run duration.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field

import numpy as np

from ..clock import SimClock
from ..codec.config import ControllerMode, EncoderConfig, adapt_quality
from ..codec.dct import encode_blocks
from ..codec.engine import (
    MSG_INPUT_JSON,
    MSG_KEYFRAME,
    StreamDecoder,
    StreamEncoder,
    batch_region_messages,
    pack_json,
    pack_marker,
    pack_regions,
    parse_message,
)
from ..codec.regions import CODEC_QUANT_DCT, EncodedRegion
from ..codec.tiles import TILE, ContentClass, tile_counts
from ..env.events import InputEvent, InputKind, InputSource
from ..env.policy import EgressPolicy
from ..env.scenes import load_scene
from ..netsim import DOWNSTREAM, UPSTREAM, Deliver, NetEmulator, preset
from ..session import SessionRegistry
from ..transport import Channel, Endpoint, EndpointConfig
from .metrics import ClickSample, MetricsReport, click_to_photon, ssim, stutter_rate

ASP = "asp"
BASELINE = "baseline"

BASELINE_QUALITY = 80
_STRIP_H = 2 * TILE
_SSIM_SAMPLE_EVERY = 6
_ADAPT_INTERVAL_MS = 500.0
_CLICK_PERIOD_MS = 1900.0
_FIRST_CLICK_MS = 2200.0


class BaselineEncoder:
    """Full-frame fixed-quality strip encoder.

    Output bytes are exactly those of a fresh full-frame encode; unchanged
    strips are served from a content-digest cache purely to save CPU.
    """

    def __init__(self, width: int, height: int) -> None:
        self.width = width
        self.height = height
        self._cache: dict[bytes, bytes] = {}

    def encode_frame(self, pixels: np.ndarray) -> list[EncodedRegion]:
        regions = []
        for y in range(0, self.height, _STRIP_H):
            h = min(_STRIP_H, self.height - y)
            strip = pixels[y : y + h]
            digest = hashlib.blake2b(strip.tobytes(), digest_size=16).digest()
            payload = self._cache.get(digest)
            if payload is None:
                payload, _ = encode_blocks(strip, BASELINE_QUALITY)
                if len(self._cache) > 512:
                    self._cache.clear()
                self._cache[digest] = payload
            regions.append(
                EncodedRegion(
                    x=0,
                    y=y,
                    w=self.width,
                    h=h,
                    content_class=ContentClass.NATURAL,
                    codec_id=CODEC_QUANT_DCT,
                    quality=BASELINE_QUALITY,
                    payload=payload,
                    is_keyframe=True,
                )
            )
        return regions


class CachingDecoder(StreamDecoder):
    """StreamDecoder with a payload-digest decode cache (pure speedup:
    identical region payloads decode to identical pixels)."""

    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        self._decode_cache: dict = {}

    def apply_message(self, data: bytes, now_ms: float):
        try:
            msg = parse_message(data)
        except Exception:
            return None
        if msg.msg_type == MSG_KEYFRAME and msg.regions:
            for region in msg.regions:
                self._apply_cached(region, msg.frame_index, now_ms)
            self.started = True
            self.keyframes_applied += 1
            self.last_keyframe_index = msg.frame_index
            self.last_applied_frame = max(self.last_applied_frame, msg.frame_index)
            self._present(msg.frame_index, now_ms)
            return msg
        return super().apply_message(data, now_ms)

    def _apply_cached(self, region, frame_index, now_ms) -> None:
        from ..codec.regions import decode_region

        key = (region.codec_id, region.quality, region.w, region.h,
               hashlib.blake2b(region.payload, digest_size=16).digest())
        rect = self._decode_cache.get(key)
        if rect is None:
            decode_region(region, self.canvas, prev_decoded=self.canvas)
            rect = self.canvas[region.y : region.y + region.h, region.x : region.x + region.w].copy()
            if len(self._decode_cache) > 512:
                self._decode_cache.clear()
            self._decode_cache[key] = rect
        else:
            self.canvas[region.y : region.y + region.h, region.x : region.x + region.w] = rect
        self._log(region, frame_index, now_ms)


@dataclass
class _RunState:
    clock: SimClock
    emulator: NetEmulator
    server_ep: Endpoint
    client_ep: Endpoint
    queue: list = field(default_factory=list)  # (at_ms, tiebreak, target, datagram)
    tiebreak: int = 0
    downstream_bytes: int = 0

    def push(self, direction: str, datagram: bytes) -> None:
        now = self.clock.now_ms()
        if direction == DOWNSTREAM:
            self.downstream_bytes += len(datagram)
        res = self.emulator.apply(len(datagram), direction, now)
        if isinstance(res, Deliver):
            self.tiebreak += 1
            target = "client" if direction == DOWNSTREAM else "server"
            heapq.heappush(self.queue, (res.at_ms, self.tiebreak, target, datagram))

    def deliver_due(self) -> list[tuple[str, bytes]]:
        now = self.clock.now_ms()
        out = []
        while self.queue and self.queue[0][0] <= now:
            _, _, target, datagram = heapq.heappop(self.queue)
            out.append((target, datagram))
        return out


def run_scenario(
    scene_name: str,
    protocol: str,
    net_preset: str,
    duration_ms: float,
    seed: int,
    *,
    with_clicks: bool = False,
    with_hash_log: bool = False,
    compute_ssim: bool = True,
    controller: ControllerMode = ControllerMode.HUMAN,
) -> MetricsReport:
    if duration_ms < 10_000:
        raise ValueError("duration_ms must be at least 10000 simulated ms")
    if protocol not in (ASP, BASELINE):
        raise ValueError(f"unknown protocol {protocol!r}")

    clock = SimClock()
    registry = SessionRegistry(clock=clock)
    session = registry.create_session(
        scene_name, EgressPolicy.default_deny(), ttl_ms=duration_ms + 60_000, scene_seed=seed
    )
    scene = session.scene
    fps = scene.target_fps if controller is ControllerMode.HUMAN else 5
    interval = 1000.0 / fps

    ep_cfg = EndpointConfig(frame_interval_ms=interval)
    state = _RunState(
        clock=clock,
        emulator=NetEmulator(preset(net_preset), seed ^ 0x5EED),
        server_ep=Endpoint(ep_cfg),
        client_ep=Endpoint(ep_cfg),
    )

    config = EncoderConfig(controller_mode=controller, target_fps=scene.target_fps)
    if protocol == ASP:
        config = adapt_quality(state.server_ep.estimate, config)
    encoder = StreamEncoder(scene.width, scene.height, config)
    baseline = BaselineEncoder(scene.width, scene.height)
    decoder = CachingDecoder(scene.width, scene.height, log_regions=True)

    # deterministic click schedule against the scene's response rect
    clicks: list[float] = []
    if with_clicks and "button" in scene.interactive_responses:
        t = _FIRST_CLICK_MS
        while t < duration_ms - 1500.0:
            clicks.append(t)
            t += _CLICK_PERIOD_MS
    response_rect = scene.interactive_responses.get("button")

    # the bench viewer takes over as the human before streaming starts
    session.request_takeover("bench-viewer")

    frame_cache: dict[int, np.ndarray] = {}
    scene_hash_log: list[int] = []
    ssim_samples: list[float] = []
    sampled_presents = 0
    click_iter = iter(clicks)
    next_click = next(click_iter, None)
    pending_clicks: list[tuple[float, float]] = []  # (click_ms, server_frame)
    click_samples: list[ClickSample] = []

    next_frame_t = 0.0
    frame_index = 0
    next_adapt = _ADAPT_INTERVAL_MS
    applied_cursor = 0
    present_cursor = 0
    step = 5.0
    end = float(duration_ms)
    # demand governor: keep encoded bytes/frame near the paced-rate budget by
    # capping quality below the rate curve when content runs hot
    demand_ewma = 0.0
    quality_cap = 95

    tx, ty = tile_counts(scene.width, scene.height)
    resend_mask = np.zeros((ty, tx), dtype=bool)

    def mark_for_resend(region) -> None:
        resend_mask[
            region.y // TILE : -(-(region.y + region.h) // TILE),
            region.x // TILE : -(-(region.x + region.w) // TILE),
        ] = True

    def server_send_regions(regions, fi):
        if protocol == ASP:
            # defer what exceeds the pacing budget; deferred tiles re-encode
            # self-contained next frame, so the client never needs missed state
            budget = max(16_384.0, state.server_ep.send_rate_bps * interval / 4000.0)
            room = budget - state.server_ep.video_backlog_bytes()
            kept = []
            for region in regions:
                size = len(region.payload) + 16
                if room - size < 0 and kept:
                    mark_for_resend(region)
                else:
                    kept.append(region)
                    room -= size
            for data in batch_region_messages(fi, kept):
                state.server_ep.send_message(Channel.VIDEO, data, clock.now_ms(), group=fi)
            state.server_ep.send_message(
                Channel.INPUT, pack_marker(fi), clock.now_ms()
            )
        else:
            bundle = pack_regions(MSG_KEYFRAME, fi, regions)
            state.server_ep.send_message(
                Channel.VIDEO, bundle, clock.now_ms(), keyframe=False, group=fi
            )

    while clock.now_ms() < end:
        now = clock.now_ms()

        # client: inject scheduled clicks
        while next_click is not None and now >= next_click and response_rect is not None:
            event = InputEvent(
                InputKind.MOUSE_CLICK,
                InputSource.HUMAN,
                next_click,
                x=response_rect[0] + 8,
                y=response_rect[1] + 8,
            )
            state.client_ep.send_message(
                Channel.INPUT, pack_json(MSG_INPUT_JSON, event.to_json_obj()), now
            )
            click_samples.append(ClickSample(next_click, None))
            next_click = next(click_iter, None)

        # server: render/encode due frames
        while now >= next_frame_t and next_frame_t < end:
            t_frame = next_frame_t
            fb = session.render_frame(t_frame)
            pixels = fb.pixels
            if compute_ssim:
                frame_cache[frame_index] = pixels
                if len(frame_cache) > 64:
                    frame_cache.pop(min(frame_cache))
            if with_hash_log:
                scene_hash_log.append(fb.content_hash())
            if protocol == ASP:
                if state.server_ep.take_keyframe_requested():
                    encoder.start_intra_wave()
                if encoder.frames_encoded == 0:
                    regions = encoder.encode_keyframe(pixels, frame_index)
                    state.server_ep.send_message(
                        Channel.CONTROL,
                        pack_regions(MSG_KEYFRAME, frame_index, regions),
                        now,
                        keyframe=True,
                    )
                else:
                    wave_budget = int(
                        state.server_ep.send_rate_bps * interval / 8000.0 / 2
                    )
                    pending = resend_mask.copy()
                    resend_mask[:] = False
                    regions = encoder.encode_frame(
                        pixels,
                        frame_index,
                        wave_budget_bytes=max(2048, wave_budget),
                        resend_intra=pending,
                    )
                    server_send_regions(regions, frame_index)
                    frame_bytes = sum(len(r.payload) + 16 for r in regions)
                    demand_ewma = 0.85 * demand_ewma + 0.15 * frame_bytes
                    budget = state.server_ep.send_rate_bps * interval / 8000.0
                    if demand_ewma > 0.85 * budget:
                        quality_cap = max(20, quality_cap - 4)
                    elif demand_ewma < 0.5 * budget:
                        quality_cap = min(95, quality_cap + 2)
            else:
                server_send_regions(baseline.encode_frame(pixels), frame_index)
            frame_index += 1
            next_frame_t += interval

        # ASP: periodic quality adaptation from the congestion-controlled rate,
        # further capped by the content-demand governor
        if protocol == ASP and now >= next_adapt:
            next_adapt += _ADAPT_INTERVAL_MS
            est = state.server_ep.estimate
            est = type(est)(
                rate_bps=state.server_ep.send_rate_bps,
                loss_rate=est.loss_rate,
                rtt_ms=est.rtt_ms,
            )
            cfg = adapt_quality(est, encoder.config)
            cfg = type(cfg)(
                controller_mode=cfg.controller_mode,
                target_fps=cfg.target_fps,
                quality_natural=min(cfg.quality_natural, quality_cap),
                quality_motion=min(cfg.quality_motion, quality_cap),
                keyframe_interval_frames=cfg.keyframe_interval_frames,
            )
            encoder.set_config(cfg)

        # pump endpoints through the emulator
        for datagram in state.server_ep.poll(now):
            state.push(DOWNSTREAM, datagram)
        for datagram in state.client_ep.poll(now):
            state.push(UPSTREAM, datagram)
        for target, datagram in state.deliver_due():
            if target == "client":
                for delivery in state.client_ep.on_datagram(datagram, now):
                    decoder.apply_message(delivery.data, now)
            else:
                for delivery in state.server_ep.on_datagram(datagram, now):
                    _server_handle(session, delivery, pending_clicks, frame_index)
        for delivery in state.client_ep.poll_receive(now):
            decoder.apply_message(delivery.data, now)

        # resolve click photons and sample ssim on new presents
        present_cursor, applied_cursor = _resolve_clicks(
            decoder, click_samples, response_rect, present_cursor, applied_cursor
        )
        while sampled_presents < len(decoder.presents):
            fi, at = decoder.presents[sampled_presents]
            if compute_ssim and sampled_presents % _SSIM_SAMPLE_EVERY == 0:
                # measure codec fidelity against the newest content the canvas
                # actually holds (latency is scored separately)
                content_fi = min(fi, decoder.last_applied_frame)
                if content_fi in frame_cache:
                    ssim_samples.append(ssim(frame_cache[content_fi], decoder.canvas))
            sampled_presents += 1

        clock.advance(step)

    present_times = [t for _, t in decoder.presents]
    stutter = (
        stutter_rate(present_times, scene.target_fps) if len(present_times) >= 2 else 1.0
    )
    latency = None
    if with_clicks:
        try:
            latency = click_to_photon(click_samples)
        except Exception:
            latency = None
    return MetricsReport(
        protocol=protocol,
        scene=scene_name,
        net_preset=net_preset,
        duration_ms=duration_ms,
        mean_bandwidth_bps=state.downstream_bytes * 8000.0 / duration_ms,
        stutter_rate=stutter,
        click_to_photon_ms=latency,
        ssim_mean=float(np.mean(ssim_samples)) if ssim_samples else 0.0,
        presented_frames=len(decoder.presents),
        seed=seed,
        scene_hash_log=tuple(scene_hash_log),
    )


def _server_handle(session, delivery, pending_clicks, frame_index) -> None:
    if delivery.channel != Channel.INPUT:
        return
    try:
        msg = parse_message(delivery.data)
    except Exception:
        return
    if msg.msg_type != MSG_INPUT_JSON or msg.obj is None:
        return
    event = InputEvent.from_json_obj(msg.obj)
    try:
        session.inject_input(event)
    except Exception:
        return
    pending_clicks.append((event.client_timestamp_ms, float(frame_index)))


def _resolve_clicks(decoder, click_samples, response_rect, present_cursor, applied_cursor):
    """Match applied response regions to presents for click-to-photon."""
    if response_rect is None:
        return len(decoder.presents), len(decoder.applied_regions)
    rx, ry, rw, rh = response_rect
    new_applied = decoder.applied_regions[applied_cursor:]
    applied_cursor = len(decoder.applied_regions)
    for region in new_applied:
        x, y, w, h = region.rect
        if x < rx + rw and x + w > rx and y < ry + rh and y + h > ry:
            for i, sample in enumerate(click_samples):
                if sample.photon_ms is None and region.at_ms > sample.click_ms:
                    # response content decoded; photon = next present at/after it
                    click_samples[i] = ClickSample(sample.click_ms, -region.at_ms)
                    break
    # presents convert provisional (negative) apply times into photon times
    for i, sample in enumerate(click_samples):
        if sample.photon_ms is not None and sample.photon_ms < 0:
            applied_at = -sample.photon_ms
            for fi, at in decoder.presents:
                if at >= applied_at:
                    click_samples[i] = ClickSample(sample.click_ms, at)
                    break
    return len(decoder.presents), applied_cursor
