import json
from pathlib import Path

import numpy as np
import pytest

from assetgen import geometry, scenegen
from assetgen.errors import SpecInvalid


def single_cuboid_spec(motion_mode="camera_orbit", n_frames=8):
    obj = scenegen.ObjectSpec(
        shape="cuboid",
        color=scenegen.PALETTE[0],
        box=geometry.Box3D([1.0, 0.0, 0.5], [1.0, 1.0, 1.0], geometry.yaw_quat(0.3)),
    )
    return scenegen.SceneSpec(
        seed=0,
        objects=[obj],
        motion_mode=motion_mode,
        n_frames=n_frames,
        camera=scenegen.CameraPath(radius=7.0, height=3.0, azimuth_start=0.4, azimuth_rate=0.1),
    )


class TestRenderClip:
    def test_orbit_moves_box2d_not_box3d(self):
        frames = scenegen.render_clip(single_cuboid_spec())
        centers_w = []
        for fr in frames:
            (fo,) = fr.objects
            assert fo.object_id == 0
            assert np.array_equal(fo.box3d.center, [1.0, 0.0, 0.5])
            centers_w.append((fo.box2d.x_min + fo.box2d.x_max) / 2)
        diffs = np.diff(centers_w)
        assert np.all(diffs > 0) or np.all(diffs < 0)

    def test_occluded_object_color_absent(self):
        cam_path = scenegen.CameraPath(
            radius=7.0, height=0.8, azimuth_start=0.0, azimuth_rate=0.0, target=[0, 0, 0.8]
        )
        near = scenegen.ObjectSpec(
            shape="cuboid",
            color=scenegen.PALETTE[0],
            box=geometry.Box3D([2.5, 0.0, 0.8], [1.6, 1.6, 1.6], [1, 0, 0, 0]),
        )
        far = scenegen.ObjectSpec(
            shape="sphere",
            color=scenegen.PALETTE[2],
            box=geometry.Box3D([-0.4, 0.0, 0.8], [0.5, 0.5, 0.5], [1, 0, 0, 0]),
        )
        spec = scenegen.SceneSpec(
            seed=0, objects=[near, far], motion_mode="camera_orbit", n_frames=2,
            camera=cam_path,
        )
        frame = scenegen.render_frame(spec, 0)
        assert scenegen.color_mask(frame.image, near.color).sum() > 50
        assert scenegen.color_mask(frame.image, far.color).sum() == 0
        assert {fo.object_id for fo in frame.objects} == {0, 1}

    def test_deterministic_rendering(self):
        spec = scenegen.SceneSpec.sample(seed=5, n_objects=(2, 3))
        a = scenegen.render_clip(spec)
        b = scenegen.render_clip(spec)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa.image, fb.image)

    def test_annotation_consistency(self):
        spec = scenegen.SceneSpec.sample(seed=11, n_objects=2)
        for fr in scenegen.render_clip(spec):
            for fo in fr.objects:
                b2 = geometry.box2d_from_box3d(fo.box3d, fr.camera)
                got = [fo.box2d.x_min, fo.box2d.y_min, fo.box2d.x_max, fo.box2d.y_max]
                want = [b2.x_min, b2.y_min, b2.x_max, b2.y_max]
                assert np.allclose(got, want, atol=1e-6)

    def test_photometric_probe(self):
        # Pixel-color centroid of each sufficiently visible object lies inside
        # its 10%-dilated 2D box.
        for seed in range(4):
            spec = scenegen.SceneSpec.sample(seed=seed, n_objects=(2, 3))
            frame = scenegen.render_frame(spec, 0)
            H, W, _ = frame.image.shape
            for fo in frame.objects:
                mask = scenegen.color_mask(frame.image, spec.objects[fo.object_id].color)
                if mask.sum() < 50:
                    continue
                ys, xs = np.nonzero(mask)
                cx = (xs.mean() + 0.5) / W
                cy = (ys.mean() + 0.5) / H
                dil = fo.box2d.dilated(0.10)
                assert dil.contains(cx, cy), (seed, fo.object_id)

    def test_shapes_render_and_annotate(self):
        for shape in scenegen.SHAPES:
            obj = scenegen.ObjectSpec(
                shape=shape,
                color=scenegen.PALETTE[1],
                box=geometry.Box3D([0, 0, 0.5], [1, 1, 1], geometry.yaw_quat(0.4)),
            )
            spec = scenegen.SceneSpec(
                seed=0, objects=[obj], motion_mode="camera_orbit", n_frames=2,
                camera=scenegen.CameraPath(radius=6.0, height=2.0),
            )
            frame = scenegen.render_frame(spec, 0)
            mask = scenegen.color_mask(frame.image, obj.color)
            assert mask.sum() > 30
            ys, xs = np.nonzero(mask)
            b2 = frame.objects[0].box2d
            H, W, _ = frame.image.shape
            assert (xs / W >= b2.x_min - 0.02).all() and (xs / W <= b2.x_max + 0.02).all()
            assert (ys / H >= b2.y_min - 0.02).all() and (ys / H <= b2.y_max + 0.02).all()


class TestSpecValidation:
    def test_duplicate_colors_rejected(self):
        box_a = geometry.Box3D([1.5, 0, 0.5], [1, 1, 1], [1, 0, 0, 0])
        box_b = geometry.Box3D([-1.5, 0, 0.5], [1, 1, 1], [1, 0, 0, 0])
        objs = [
            scenegen.ObjectSpec(shape="cuboid", color=scenegen.PALETTE[0], box=box_a),
            scenegen.ObjectSpec(shape="sphere", color=scenegen.PALETTE[0], box=box_b),
        ]
        spec = scenegen.SceneSpec(seed=0, objects=objs)
        with pytest.raises(SpecInvalid):
            spec.validate()

    def test_interpenetration_rejected(self):
        box_a = geometry.Box3D([0, 0, 0.5], [1, 1, 1], [1, 0, 0, 0])
        box_b = geometry.Box3D([0.3, 0, 0.5], [1, 1, 1], [1, 0, 0, 0])
        objs = [
            scenegen.ObjectSpec(shape="cuboid", color=scenegen.PALETTE[0], box=box_a),
            scenegen.ObjectSpec(shape="cuboid", color=scenegen.PALETTE[1], box=box_b),
        ]
        spec = scenegen.SceneSpec(seed=0, objects=objs)
        with pytest.raises(SpecInvalid):
            spec.validate()

    def test_sampled_specs_valid_and_deterministic(self):
        a = scenegen.SceneSpec.sample(seed=3)
        b = scenegen.SceneSpec.sample(seed=3)
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
        back = scenegen.SceneSpec.from_dict(a.to_dict())
        assert json.dumps(back.to_dict(), sort_keys=True) == json.dumps(a.to_dict(), sort_keys=True)


class TestGenerateDataset:
    def test_file_counts(self, tmp_path):
        out = scenegen.generate_dataset(tmp_path / "ds", n_clips=2, frames_per_clip=4, seed=1)
        images = sorted(out.glob("clips/*/frame_*.png"))
        annotations = sorted(out.glob("clips/*/annotation.json"))
        assert len(images) == 8
        assert len(annotations) == 2
        assert (out / "dataset.json").exists()

    def test_deterministic_bytes(self, tmp_path):
        a = scenegen.generate_dataset(tmp_path / "a", n_clips=2, frames_per_clip=3, seed=7)
        b = scenegen.generate_dataset(tmp_path / "b", n_clips=2, frames_per_clip=3, seed=7)
        for rel in ["clips/clip_00000/annotation.json", "clips/clip_00001/annotation.json"]:
            assert (a / rel).read_bytes() == (b / rel).read_bytes()
        for img in sorted(a.glob("clips/*/frame_*.png")):
            twin = b / img.relative_to(a)
            assert img.read_bytes() == twin.read_bytes()

    def test_reprojection_roundtrip(self, tmp_path):
        out = scenegen.generate_dataset(tmp_path / "ds", n_clips=2, frames_per_clip=3, seed=3)
        for ann_path in out.glob("clips/*/annotation.json"):
            ann = json.loads(ann_path.read_text())
            intr = ann["intrinsics"]
            for fr in ann["frames"]:
                cam = geometry.CameraModel(
                    fx=intr["fx"], fy=intr["fy"], cx=intr["cx"], cy=intr["cy"],
                    width=intr["width"], height=intr["height"],
                    extrinsics=geometry.RigidTransform.from_dict(fr["extrinsics"]),
                )
                for obj in fr["objects"]:
                    box = geometry.Box3D.from_dict(obj["box3d"])
                    b2 = geometry.box2d_from_box3d(box, cam)
                    stored = obj["box2d"]
                    assert np.allclose(
                        [b2.x_min, b2.y_min, b2.x_max, b2.y_max],
                        [stored["x_min"], stored["y_min"], stored["x_max"], stored["y_max"]],
                        atol=1e-6,
                    )

    def test_image_roundtrip(self, tmp_path):
        img = np.random.default_rng(0).uniform(0, 1, size=(16, 16, 3)).astype(np.float32)
        scenegen.save_image(img, tmp_path / "x.png")
        back = scenegen.load_image(tmp_path / "x.png")
        assert back.shape == (16, 16, 3)
        assert np.abs(back - img).max() <= 0.5 / 255 + 1e-6
