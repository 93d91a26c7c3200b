"""Image embedding backends used by the perceptual loss.

A backend maps a 224x224 ink image to a unit-norm global vector plus a list
of feature maps. Differentiable backends also provide ``vjp`` (the adjoint of
``embed`` at an image), which is all the loss code needs for gradients.
"""

from __future__ import annotations

import io
import json
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .errors import FreesketchError, InputError

CANVAS = 224


@dataclass
class Embedding:
    global_: np.ndarray
    layers: list


class EmbeddingBackend(Protocol):
    differentiable: bool

    def embed(self, image) -> Embedding: ...

    def vjp(self, image, d_global, d_layers) -> np.ndarray: ...


def normalize(v):
    """Unit vector, or the zero vector when ``v`` has no length."""
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return np.zeros_like(v, dtype=float), 0.0
    return v / norm, norm


def _check_image(image):
    img = np.asarray(image, dtype=float)
    if img.shape != (CANVAS, CANVAS):
        raise InputError(f"expected a {CANVAS}x{CANVAS} image, got {img.shape}")
    return img


class PyramidBackend:
    """Blur-and-pool pyramid standing in for a pretrained encoder.

    Each level blurs with ``sigma = factor / 2`` (zero padding) and averages
    ``factor x factor`` blocks. The 56- and 28-pixel levels are the
    "geometric" layers; the 14-pixel level, flattened and normalised, is the
    global embedding. Every step is linear up to the final normalisation,
    and zero-padded Gaussian blur is self-adjoint, so ``vjp`` is exact.
    """

    differentiable = True

    def __init__(self, layer_sizes=(56, 28), global_size=14):
        for s in (*layer_sizes, global_size):
            if CANVAS % s:
                raise ValueError(f"{s} does not divide {CANVAS}")
        self.layer_sizes = tuple(layer_sizes)
        self.global_size = global_size

    def __repr__(self):
        return f"PyramidBackend(layer_sizes={self.layer_sizes}, global_size={self.global_size})"

    @staticmethod
    def _level(img, size):
        f = CANVAS // size
        blurred = gaussian_filter(img, f / 2.0, mode="constant")
        return blurred.reshape(size, f, size, f).mean(axis=(1, 3))

    @staticmethod
    def _level_adjoint(grad, size):
        f = CANVAS // size
        up = np.repeat(np.repeat(grad, f, axis=0), f, axis=1) / (f * f)
        return gaussian_filter(up, f / 2.0, mode="constant")

    def embed(self, image) -> Embedding:
        img = _check_image(image)
        layers = [self._level(img, s) for s in self.layer_sizes]
        g, _ = normalize(self._level(img, self.global_size).ravel())
        return Embedding(g, layers)

    def vjp(self, image, d_global, d_layers) -> np.ndarray:
        img = _check_image(image)
        out = np.zeros_like(img)
        for size, g in zip(self.layer_sizes, d_layers):
            if g is not None:
                out += self._level_adjoint(np.asarray(g, float).reshape(size, size), size)
        if d_global is not None:
            raw = self._level(img, self.global_size).ravel()
            unit, norm = normalize(raw)
            if norm > 0:
                dg = np.asarray(d_global, float)
                d_raw = (dg - unit * np.dot(unit, dg)) / norm
                s = self.global_size
                out += self._level_adjoint(d_raw.reshape(s, s), s)
        return out


class ExternalBackend:
    """Embeddings from an external program, e.g. a real CLIP model.

    The program receives the image as an 8-bit grayscale PNG (dark ink on
    white), on stdin by default or as a file path substituted for ``{path}``
    in the command. It must print JSON ``{"global": [...], "layers": [...]}``.
    Gradients are not part of the protocol, so this backend can score
    sketches but cannot drive the optimizer.
    """

    differentiable = False

    def __init__(self, command, timeout: float = 300.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise InputError("external backend needs a command")
        self.timeout = timeout

    def __repr__(self):
        return f"ExternalBackend({shlex.join(self.command)!r})"

    @staticmethod
    def encode_png(image) -> bytes:
        img = np.clip(_check_image(image), 0.0, 1.0)
        buf = io.BytesIO()
        Image.fromarray(np.round((1.0 - img) * 255).astype(np.uint8), mode="L").save(buf, "PNG")
        return buf.getvalue()

    def _run(self, png: bytes) -> str:
        if any("{path}" in part for part in self.command):
            with tempfile.TemporaryDirectory() as tmp:
                path = Path(tmp) / "image.png"
                path.write_bytes(png)
                cmd = [part.replace("{path}", str(path)) for part in self.command]
                proc = subprocess.run(cmd, capture_output=True, timeout=self.timeout)
        else:
            proc = subprocess.run(self.command, input=png, capture_output=True,
                                  timeout=self.timeout)
        if proc.returncode != 0:
            raise FreesketchError(f"embedding command failed ({proc.returncode}): "
                                  f"{proc.stderr.decode(errors='replace').strip()}")
        return proc.stdout.decode()

    def embed(self, image) -> Embedding:
        try:
            data = json.loads(self._run(self.encode_png(image)))
            g = np.asarray(data["global"], dtype=float).ravel()
            layers = [np.asarray(layer, dtype=float) for layer in data.get("layers", [])]
        except (ValueError, KeyError, TypeError) as exc:
            raise FreesketchError(f"bad response from embedding command: {exc}") from None
        g, _ = normalize(g)
        return Embedding(g, layers)

    def vjp(self, image, d_global, d_layers):
        raise FreesketchError("external embedding backend does not provide gradients")


def default_backend() -> PyramidBackend:
    return PyramidBackend()


def make_backend(spec: str | None):
    """``"default"`` or ``"external:<command>"``."""
    if spec in (None, "", "default"):
        return default_backend()
    if spec.startswith("external:"):
        return ExternalBackend(spec[len("external:"):])
    raise InputError(f"unknown backend {spec!r}; use 'default' or 'external:<command>'")
