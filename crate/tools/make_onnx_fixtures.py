#!/usr/bin/env python3
"""Generate the small ONNX fixture models used by the integration tests.

The models are written directly as protobuf wire format so the generator
has no dependency beyond the Python standard library. Each model takes a
[1, 1, 8, 8] float input, flattens it and applies seeded dense layers:

- model_ok.onnx:      probs [1, 5] via Softmax, features [1, 1280]
- model_swapped.onnx: same, but with the outputs declared in the other order
- model_logits.onnx:  class head without the Softmax (raw logits)
- model_badshape.onnx: input declared [1, 3, 8, 8] (not single-channel)
- model_badout.onnx:  feature head is 7-wide instead of 1280

Weights are seeded so regenerating the files is reproducible.
"""

import random
import struct
import sys
from pathlib import Path

FLOAT = 1
INT64 = 7


def varint(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def tag(field: int, wire_type: int) -> bytes:
    return varint((field << 3) | wire_type)


def field_varint(field: int, value: int) -> bytes:
    return tag(field, 0) + varint(value)


def field_bytes(field: int, payload: bytes) -> bytes:
    return tag(field, 2) + varint(len(payload)) + payload


def field_string(field: int, text: str) -> bytes:
    return field_bytes(field, text.encode())


def tensor_f32(name: str, dims, values) -> bytes:
    msg = b"".join(field_varint(1, d) for d in dims)
    msg += field_varint(2, FLOAT)
    msg += field_string(8, name)
    msg += field_bytes(9, struct.pack(f"<{len(values)}f", *values))
    return msg


def tensor_i64(name: str, dims, values) -> bytes:
    msg = b"".join(field_varint(1, d) for d in dims)
    msg += field_varint(2, INT64)
    msg += field_string(8, name)
    msg += field_bytes(9, struct.pack(f"<{len(values)}q", *values))
    return msg


def value_info(name: str, dims) -> bytes:
    shape = b"".join(field_bytes(1, field_varint(1, d)) for d in dims)
    tensor_type = field_varint(1, FLOAT) + field_bytes(2, shape)
    type_proto = field_bytes(1, tensor_type)
    return field_string(1, name) + field_bytes(2, type_proto)


def node(op_type: str, inputs, outputs, attributes=b"") -> bytes:
    msg = b"".join(field_string(1, i) for i in inputs)
    msg += b"".join(field_string(2, o) for o in outputs)
    msg += field_string(4, op_type)
    msg += attributes
    return msg


def attr_int(name: str, value: int) -> bytes:
    # AttributeProto: name=1, i=3, type=20 (INT=2)
    return field_bytes(5, field_string(1, name) + field_varint(3, value) + field_varint(20, 2))


def build_model(path: Path, *, seed: int, channels: int = 1, with_softmax: bool = True,
                feature_width: int = 1280, swap_outputs: bool = False) -> None:
    rng = random.Random(seed)
    flat = channels * 64
    w_cls = [rng.uniform(-1.0, 1.0) for _ in range(flat * 5)]
    w_feat = [rng.uniform(-1.0, 1.0) for _ in range(flat * feature_width)]

    nodes = [
        node("Reshape", ["input", "flat_shape"], ["flat"]),
        node("MatMul", ["flat", "w_cls"], ["logits"]),
        node("MatMul", ["flat", "w_feat"], ["features"]),
    ]
    if with_softmax:
        nodes.append(node("Softmax", ["logits"], ["probs"], attr_int("axis", 1)))
        class_out = "probs"
    else:
        class_out = "logits"

    initializers = [
        tensor_i64("flat_shape", [2], [1, flat]),
        tensor_f32("w_cls", [flat, 5], w_cls),
        tensor_f32("w_feat", [flat, feature_width], w_feat),
    ]
    outputs = [
        value_info(class_out, [1, 5]),
        value_info("features", [1, feature_width]),
    ]
    if swap_outputs:
        outputs.reverse()

    graph = b"".join(field_bytes(1, n) for n in nodes)
    graph += field_string(2, "fixture")
    graph += b"".join(field_bytes(5, t) for t in initializers)
    graph += field_bytes(11, value_info("input", [1, channels, 8, 8]))
    graph += b"".join(field_bytes(12, o) for o in outputs)

    model = field_varint(1, 8)  # ir_version
    model += field_string(2, "fixture-gen")
    model += field_bytes(7, graph)
    model += field_bytes(8, field_varint(2, 13))  # default-domain opset 13

    path.write_bytes(model)
    print(f"wrote {path} ({len(model)} bytes)")


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("crates/core/tests/fixtures")
    out_dir.mkdir(parents=True, exist_ok=True)
    build_model(out_dir / "model_ok.onnx", seed=1)
    build_model(out_dir / "model_swapped.onnx", seed=1, swap_outputs=True)
    build_model(out_dir / "model_logits.onnx", seed=2, with_softmax=False)
    build_model(out_dir / "model_badshape.onnx", seed=3, channels=3)
    build_model(out_dir / "model_badout.onnx", seed=4, feature_width=7)


if __name__ == "__main__":
    main()
