"""Checkpoint persistence for trained networks."""

import pickle
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
import torch

from .networks import Discriminator, Generator
from ..core.schema import DatasetSchema, schema_hash
from ..utils.constants import DTYPE, FORMAT_VERSION
from ..utils.errors import CheckpointMismatchError
from ..utils.logging_config import logger


def _to_arrays(module: torch.nn.Module) -> Dict[str, np.ndarray]:
    return {name: tensor.detach().cpu().numpy().copy() for name, tensor in module.state_dict().items()}


def _load_arrays(module: torch.nn.Module, arrays: Dict[str, np.ndarray]):
    expected = module.state_dict()
    if set(expected) != set(arrays):
        raise CheckpointMismatchError("checkpoint parameter names do not match the network")
    for name, tensor in expected.items():
        if tuple(tensor.shape) != arrays[name].shape:
            raise CheckpointMismatchError(
                f"parameter '{name}' has shape {arrays[name].shape}, expected {tuple(tensor.shape)}"
            )
    module.load_state_dict({name: torch.as_tensor(a, dtype=DTYPE) for name, a in arrays.items()})


def save_checkpoint(path: str, schema: DatasetSchema, gen_net: Generator, critic: Discriminator, epoch: int):
    """Write both networks' parameters as named arrays; equal parameters give equal bytes."""
    payload = {
        'format_version': FORMAT_VERSION,
        'schema_hash': schema_hash(schema),
        'schema': schema.to_dict(),
        'epoch': int(epoch),
        'generator': _to_arrays(gen_net),
        'discriminator': _to_arrays(critic),
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        pickle.dump(payload, f, protocol=pickle.HIGHEST_PROTOCOL)
    logger.info(f"Checkpoint for epoch {epoch} saved to {path}")


def load_checkpoint(path: str, expected_hash: str = None) -> Tuple[DatasetSchema, Generator, Discriminator, int]:
    """Rebuild the networks; with `expected_hash`, refuse a checkpoint built for another schema."""
    with open(path, 'rb') as f:
        payload = pickle.load(f)
    schema = DatasetSchema.from_dict(payload['schema'])
    stored_hash = payload['schema_hash']
    if schema_hash(schema) != stored_hash:
        raise CheckpointMismatchError(f"checkpoint {path} is inconsistent with its own schema hash")
    if expected_hash is not None and stored_hash != expected_hash:
        raise CheckpointMismatchError(
            f"checkpoint schema hash {stored_hash[:12]} does not match transforms {expected_hash[:12]}"
        )

    gen_net, critic = Generator(schema), Discriminator(schema)
    _load_arrays(gen_net, payload['generator'])
    _load_arrays(critic, payload['discriminator'])
    logger.info(f"Checkpoint loaded from {path} (epoch {payload['epoch']})")
    return schema, gen_net, critic, int(payload['epoch'])
