#!/usr/bin/env python3
"""Export Inception-v3 pool features (2048-d) to ONNX for the inception_v3 embedder.

Needs torch, torchvision and onnx. Input is NCHW float32 at 299x299 in
[-1, 1]; output is the flattened average-pool layer. Uses the pytorch-fid
port of the FID Inception weights when that package is installed,
torchvision's ImageNet weights otherwise.

    python3 tools/export_inception.py $EVOGAN_CACHE/inception_v3_pool3.onnx
"""

import argparse
import pathlib
import sys

import torch


class PoolFeatures(torch.nn.Module):
    def __init__(self, backbone):
        super().__init__()
        self.backbone = backbone

    def forward(self, x):
        return torch.flatten(self.backbone(x), 1)


def fid_backbone():
    from pytorch_fid.inception import InceptionV3

    # normalize_input=False: inputs already arrive in [-1, 1].
    net = InceptionV3([InceptionV3.BLOCK_INDEX_BY_DIM[2048]], resize_input=False, normalize_input=False)

    class Wrapped(torch.nn.Module):
        def __init__(self):
            super().__init__()
            self.net = net

        def forward(self, x):
            return self.net(x)[0]

    return Wrapped()


def torchvision_backbone():
    from torchvision.models import Inception_V3_Weights, inception_v3

    net = inception_v3(weights=Inception_V3_Weights.IMAGENET1K_V1, aux_logits=True)
    # The ported weights expect [-1, 1] after transform_input; we feed that range directly.
    net.transform_input = False
    net.fc = torch.nn.Identity()
    net.AuxLogits = None
    net.aux_logits = False
    return net


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("output", type=pathlib.Path)
    parser.add_argument("--backbone", choices=["auto", "fid", "torchvision"], default="auto")
    args = parser.parse_args()

    if args.backbone in ("auto", "fid"):
        try:
            backbone = fid_backbone()
            source = "pytorch-fid"
        except ImportError:
            if args.backbone == "fid":
                sys.exit("pytorch-fid is not installed (pip install pytorch-fid)")
            backbone = torchvision_backbone()
            source = "torchvision"
    else:
        backbone = torchvision_backbone()
        source = "torchvision"

    model = PoolFeatures(backbone).eval()
    dummy = torch.zeros(2, 3, 299, 299)
    with torch.no_grad():
        dim = model(dummy).shape[1]
    if dim != 2048:
        sys.exit(f"unexpected feature width {dim}")

    args.output.parent.mkdir(parents=True, exist_ok=True)
    torch.onnx.export(
        model,
        dummy,
        str(args.output),
        input_names=["images"],
        output_names=["pool"],
        dynamic_axes={"images": {0: "batch"}, "pool": {0: "batch"}},
        opset_version=11,
        dynamo=False,  # OpenCV's importer handles the TorchScript exporter's opset-11 graphs
    )
    print(f"wrote {args.output} ({source} weights)")


if __name__ == "__main__":
    main()
