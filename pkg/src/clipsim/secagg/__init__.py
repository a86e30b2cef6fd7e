"""Secure aggregation: ring encoding, key agreement, threshold sharing, masking."""

from .graph import CommGraph, build_k_regular
from .keys import ClientKeys, agree_pairwise
from .messages import Kind, Message, Relay
from .protocol import AbortedRound, MaskedUpdate, SecAggSession, mask_update, unmask_aggregate
from .ring import RingParams, dequantize_sum, expand_mask, quantize, ring_sum
from .shamir import SeedShare, ShareError, ShareKind, reconstruct_secret, share_secret

__all__ = [
    "AbortedRound",
    "ClientKeys",
    "CommGraph",
    "Kind",
    "MaskedUpdate",
    "Message",
    "Relay",
    "RingParams",
    "SecAggSession",
    "SeedShare",
    "ShareError",
    "ShareKind",
    "agree_pairwise",
    "build_k_regular",
    "dequantize_sum",
    "expand_mask",
    "mask_update",
    "quantize",
    "reconstruct_secret",
    "ring_sum",
    "share_secret",
    "unmask_aggregate",
]
