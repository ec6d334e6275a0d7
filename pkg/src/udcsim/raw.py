"""Bayer mosaic data model and lossless image file I/O.

Conventions fixed across the toolkit:

- The color filter array is RGGB and nothing else. R samples sit at even
  row / even column sites, G1 at even/odd, G2 at odd/even, B at odd/odd.
  Other layouts are rejected rather than silently permuted.
- Plane arithmetic happens on normalized float64 values (sample divided by
  white_level); quantization back to integers happens only when a mosaic
  is reassembled (``merge_bayer``) or an 8-bit rendering is written.
- Quantization rounds half up, ``floor(x + 0.5)``, then clamps.

On disk a mosaic is a 16-bit single-channel PNG plus a plain-text sidecar
``<stem>.meta`` recording white_level, black_level and the CFA tag.
Rendered output images are 8-bit RGB PNG. Both round-trip losslessly.
"""

from __future__ import annotations

import io as _io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import keyval
from .errors import DimensionError, DomainError, ImageIoError, ImageTypeError

CHANNELS = ("R", "G1", "G2", "B")
CHANNEL_INDEX = {name: index for index, name in enumerate(CHANNELS)}


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class BayerRaw:
    """16-bit RGGB-mosaiced sensor frame."""

    samples: np.ndarray
    black_level: int = 0
    white_level: int = 65535
    cfa: str = "RGGB"

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 2:
            raise DimensionError(f"mosaic must be 2-D, got shape {samples.shape}")
        if samples.shape[0] % 2 or samples.shape[1] % 2:
            raise DimensionError(
                f"mosaic dimensions must be even for complete RGGB tiling, got {samples.shape}"
            )
        if self.cfa != "RGGB":
            raise DomainError(f"unsupported CFA layout {self.cfa!r}; only RGGB is handled")
        if not np.issubdtype(samples.dtype, np.integer):
            raise DomainError(f"mosaic samples must be integers, got dtype {samples.dtype}")
        if not 0 < int(self.white_level) <= 65535:
            raise DomainError(f"white_level must be in (0, 65535], got {self.white_level}")
        if not 0 <= int(self.black_level) <= 65535:
            raise DomainError(f"black_level must be in [0, 65535], got {self.black_level}")
        if samples.size and (samples.min() < 0 or samples.max() > self.white_level):
            raise DomainError(
                f"samples outside [0, white_level={self.white_level}]: "
                f"range [{samples.min()}, {samples.max()}]"
            )
        object.__setattr__(self, "samples", _freeze(samples.astype(np.uint16)))
        object.__setattr__(self, "black_level", int(self.black_level))
        object.__setattr__(self, "white_level", int(self.white_level))

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    def same_pixels(self, other: "BayerRaw") -> bool:
        return (
            self.white_level == other.white_level
            and self.black_level == other.black_level
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(frozen=True)
class ChannelStack:
    """Four half-resolution planes (R, G1, G2, B), normalized to white_level."""

    r: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        planes = {}
        shape = None
        for name, plane in zip(CHANNELS, (self.r, self.g1, self.g2, self.b)):
            # adopt the array (marked read-only) rather than copying; planes
            # churn through the pipeline and copies dominate the runtime
            plane = np.asarray(plane, dtype=np.float64)
            if plane.ndim != 2:
                raise DimensionError(f"plane {name} must be 2-D, got shape {plane.shape}")
            if shape is None:
                shape = plane.shape
            elif plane.shape != shape:
                raise DimensionError(
                    f"plane {name} has shape {plane.shape}, expected {shape}"
                )
            planes[name] = _freeze(plane)
        object.__setattr__(self, "r", planes["R"])
        object.__setattr__(self, "g1", planes["G1"])
        object.__setattr__(self, "g2", planes["G2"])
        object.__setattr__(self, "b", planes["B"])

    @property
    def shape(self) -> tuple[int, int]:
        return self.r.shape

    def planes(self) -> dict[str, np.ndarray]:
        return {"R": self.r, "G1": self.g1, "G2": self.g2, "B": self.b}

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self.planes().items())

    def map(self, fn: Callable[[str, np.ndarray], np.ndarray]) -> "ChannelStack":
        """Apply ``fn(channel_name, plane)`` to every plane."""
        out = {name: fn(name, plane) for name, plane in self.items()}
        return ChannelStack(r=out["R"], g1=out["G1"], g2=out["G2"], b=out["B"])


@dataclass(frozen=True)
class RgbImage:
    """Full-resolution RGB image with channels in [0, 1]."""

    channels: np.ndarray  # shape (height, width, 3)

    def __post_init__(self):
        channels = np.asarray(self.channels, dtype=np.float64)
        if channels.ndim != 3 or channels.shape[2] != 3:
            raise DimensionError(f"expected (h, w, 3) channel array, got {channels.shape}")
        if channels.size and (channels.min() < 0.0 or channels.max() > 1.0):
            raise DomainError(
                f"RGB values outside [0, 1]: range [{channels.min()}, {channels.max()}]"
            )
        object.__setattr__(self, "channels", _freeze(channels))

    @property
    def height(self) -> int:
        return self.channels.shape[0]

    @property
    def width(self) -> int:
        return self.channels.shape[1]


AnyImage = Union[BayerRaw, RgbImage]


def quantize(values: np.ndarray, limit: int) -> np.ndarray:
    """Round half up to integers in [0, limit]. The toolkit's only quantizer."""
    buffer = np.asarray(values, dtype=np.float64) * limit
    buffer += 0.5
    np.floor(buffer, out=buffer)
    np.clip(buffer, 0, limit, out=buffer)
    return buffer.astype(np.uint16)


def split_bayer(raw: BayerRaw) -> ChannelStack:
    """Split an RGGB mosaic into four normalized half-resolution planes."""
    data = raw.samples.astype(np.float64) / float(raw.white_level)
    return ChannelStack(
        r=data[0::2, 0::2],
        g1=data[0::2, 1::2],
        g2=data[1::2, 0::2],
        b=data[1::2, 1::2],
    )


def merge_bayer(stack: ChannelStack, white_level: int = 65535, black_level: int = 0) -> BayerRaw:
    """Re-interleave planes into an RGGB mosaic, quantizing to white_level.

    Out-of-range plane values are clamped, mimicking sensor saturation.
    """
    half_h, half_w = stack.shape
    mosaic = np.empty((2 * half_h, 2 * half_w), dtype=np.float64)
    mosaic[0::2, 0::2] = stack.r
    mosaic[0::2, 1::2] = stack.g1
    mosaic[1::2, 0::2] = stack.g2
    mosaic[1::2, 1::2] = stack.b
    return BayerRaw(quantize(mosaic, white_level), black_level=black_level, white_level=white_level)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".meta")


def write_gray16_png(path: str | Path, samples: np.ndarray) -> None:
    """Atomically write a uint16 array as a 16-bit grayscale PNG."""
    samples = np.ascontiguousarray(samples, dtype=np.uint16)
    buffer = _io.BytesIO()
    Image.fromarray(samples).save(buffer, format="PNG")  # uint16 -> 16-bit grayscale
    keyval.atomic_write_bytes(path, buffer.getvalue())


def read_gray16_png(path: str | Path) -> np.ndarray:
    array, mode = _decode(path)
    if mode not in ("I;16", "I;16B", "I"):
        raise ImageTypeError(f"{path}: expected a 16-bit single-channel image, got mode {mode}")
    array = np.asarray(array)
    if array.size and (array.min() < 0 or array.max() > 65535):
        raise ImageIoError(f"{path}: sample values exceed 16-bit range")
    return array.astype(np.uint16)


def _decode(path: str | Path) -> tuple[np.ndarray, str]:
    path = Path(path)
    if not path.is_file():
        raise ImageIoError(f"{path}: no such file")
    try:
        with Image.open(path) as img:
            img.load()
            return np.asarray(img), img.mode
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageIoError(f"{path}: cannot decode image ({exc})") from exc


def save_image(path: str | Path, image: AnyImage) -> None:
    """Write a mosaic (16-bit PNG + sidecar) or RGB rendering (8-bit PNG)."""
    path = Path(path)
    if isinstance(image, BayerRaw):
        write_gray16_png(path, image.samples)
        keyval.dump(
            {
                "white_level": image.white_level,
                "black_level": image.black_level,
                "cfa": image.cfa,
            },
            sidecar_path(path),
            header="mosaic sidecar metadata",
        )
    elif isinstance(image, RgbImage):
        data = quantize(image.channels, 255).astype(np.uint8)
        buffer = _io.BytesIO()
        Image.fromarray(data, mode="RGB").save(buffer, format="PNG")
        keyval.atomic_write_bytes(path, buffer.getvalue())
    else:
        raise ImageTypeError(f"cannot save object of type {type(image).__name__}")


def load_image(path: str | Path) -> AnyImage:
    """Load a 16-bit mosaic or an 8-bit RGB image, deciding by file content."""
    path = Path(path)
    array, mode = _decode(path)
    if mode in ("I;16", "I;16B", "I"):
        array = np.asarray(array)
        if array.size and (array.min() < 0 or array.max() > 65535):
            raise ImageIoError(f"{path}: sample values exceed 16-bit range")
        meta_path = sidecar_path(path)
        white_level, black_level = 65535, 0
        if meta_path.is_file():
            meta = keyval.load(meta_path)
            source = str(meta_path)
            white_level = keyval.get_int(meta, "white_level", 65535, source=source)
            black_level = keyval.get_int(meta, "black_level", 0, source=source)
            cfa = keyval.get_str(meta, "cfa", "RGGB", source=source)
            if cfa != "RGGB":
                raise ImageIoError(f"{path}: sidecar declares unsupported CFA {cfa!r}")
        try:
            return BayerRaw(
                array.astype(np.uint16), black_level=black_level, white_level=white_level
            )
        except DomainError as exc:
            raise ImageIoError(f"{path}: not a valid mosaic ({exc})") from exc
        except DimensionError as exc:
            raise ImageIoError(f"{path}: not a valid mosaic ({exc})") from exc
    if mode == "RGB":
        return RgbImage(np.asarray(array, dtype=np.float64) / 255.0)
    raise ImageIoError(
        f"{path}: unsupported image mode {mode!r} "
        "(expected 16-bit single-channel or 8-bit three-channel)"
    )


def load_raw(path: str | Path) -> BayerRaw:
    image = load_image(path)
    if not isinstance(image, BayerRaw):
        raise ImageTypeError(f"{path}: 8-bit three-channel file is not a mosaic")
    return image


def load_rgb(path: str | Path) -> RgbImage:
    image = load_image(path)
    if not isinstance(image, RgbImage):
        raise ImageTypeError(f"{path}: 16-bit single-channel file is not an RGB image")
    return image
