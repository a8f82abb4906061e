"""Quick check of the compiled module. Run after `maturin develop -m crates/py/Cargo.toml`."""

import boxprompt as bp


def main():
    image, gt, box = bp.generate_scene("cfpg", seed=0, index=3)
    point = bp.generate_point(image, box)
    assert point.label == 1
    x, y = point.pixel()
    assert gt.get(x, y), (point, box)
    print("point", point, "in", box)

    image, gt, _ = bp.generate_scene("mbo", seed=0, index=0)
    coarse = bp.corrupt_mask(gt, dilate=3, salt=0.05, seed=0)
    refined, log = bp.refine_mask(image, coarse)
    before, after = bp.iou(coarse, gt), bp.iou(refined, gt)
    assert after > before, (before, after)
    for step in log:
        assert step["energy_after"] <= step["energy_before"] + 1e-9 * abs(step["energy_before"])
    print(f"refined IoU {before:.3f} -> {after:.3f} in {len(log)} iterations")

    report = bp.aggregate([(10, 10), (0, 200)])
    assert report["miou"] == 0.5
    assert abs(report["oiou"] - 10 / 210) < 1e-12
    print("metrics", report)

    img = bp.Image(2, 1, bytes([0, 0, 0, 255, 255, 255]))
    assert img.pixel(1, 0) == (255, 255, 255)
    mask = bp.Mask(2, 1, bytes([0, 7]))
    assert mask.to_bytes() == bytes([0, 255])
    try:
        bp.generate_point(img, bp.BoundingBox(0, 0, 3, 1))
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("oversized box accepted")
    print("ok", bp.__version__)


if __name__ == "__main__":
    main()
