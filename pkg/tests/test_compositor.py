import numpy as np
import pytest

from _support import random_buffer, raycast_composite
from proscenium.compositor import (
    OpticalModel,
    SceneEntity,
    Viewpoint,
    composite,
    front_to_back_point,
    project_back_to_front,
    render_layers,
    resample_bilinear,
)
from proscenium.core import Color, DisplayGeometry, DomainError, PixelBuffer
from proscenium.linking import LinkingParams, LinkingStyle
from proscenium.transition import LayerRenderState, RenderParams, REST_HIDDEN

SMALL = DisplayGeometry(width_px=64, height_px=36, physical_width_m=1.218,
                        physical_height_m=0.685, separation_m=0.72)


class TestProjection:
    def test_point_behind_eye_is_fixed(self):
        v = Viewpoint(0.2, -0.1, 1.3)
        p = project_back_to_front((0.2, -0.1), v, 0.7)
        assert p == (0.2, -0.1)

    def test_equal_legs_halve_offset(self):
        # Similar triangles: eye on axis at z = d sees back point (x, 0)
        # through front point (x/2, 0).
        v = Viewpoint(0.0, 0.0, 0.72)
        p = project_back_to_front((0.3, 0.0), v, 0.72)
        assert p[0] == pytest.approx(0.15, abs=1e-15)
        assert p[1] == 0.0

    def test_distant_eye_removes_parallax(self):
        v = Viewpoint(0.0, 0.0, 1e6)
        for b in [(1.0, 0.0), (0.0, -1.0), (0.6, 0.8)]:
            p = project_back_to_front(b, v, 0.72)
            assert abs(p[0] - b[0]) <= 2e-6
            assert abs(p[1] - b[1]) <= 2e-6

    def test_inverse_pair(self):
        rng = np.random.default_rng(51)
        for _ in range(200):
            v = Viewpoint(*rng.uniform(-0.5, 0.5, 2), float(rng.uniform(0.3, 3.0)))
            d = float(rng.uniform(0.1, 1.5))
            b = tuple(rng.uniform(-1, 1, 2))
            p = project_back_to_front(b, v, d)
            again = front_to_back_point(p, v, d)
            assert abs(again[0] - b[0]) < 1e-9
            assert abs(again[1] - b[1]) < 1e-9

    def test_parallax_monotone_in_eye_distance(self):
        b = (0.4, -0.2)
        prev = None
        for z in np.linspace(0.3, 5.0, 30):
            p = project_back_to_front(b, Viewpoint(0, 0, float(z)), 0.72)
            shift = np.hypot(p[0] - b[0], p[1] - b[1])
            if prev is not None:
                assert shift <= prev + 1e-15
            prev = shift

    def test_zero_separation_rejected(self):
        with pytest.raises(DomainError):
            project_back_to_front((0, 0), Viewpoint(), 0.0)

    def test_eye_behind_plane_rejected(self):
        with pytest.raises(DomainError):
            Viewpoint(0, 0, 0.0)


class TestComposite:
    def test_black_front_transmits_back_exactly(self):
        rng = np.random.default_rng(52)
        front = PixelBuffer.blank(SMALL.width_px, SMALL.height_px)
        back = random_buffer(rng, SMALL.width_px, SMALL.height_px)
        v = Viewpoint(0.05, 0.02, 1.5)
        out = composite(front, back, SMALL, v).buffer
        oracle = raycast_composite(front, back, SMALL, (0.05, 0.02, 1.5))
        assert np.abs(out.rgb - oracle).max() == 0.0
        # And in the oracle itself, alpha_front = 0 passes the back sample
        # through untouched: spot-check the formula collapse at one pixel.
        assert out.rgb[18, 32, 0] == oracle[18, 32, 0]

    def test_white_front_blocks_everything(self):
        rng = np.random.default_rng(53)
        front = PixelBuffer.filled(SMALL.width_px, SMALL.height_px, Color(1, 1, 1))
        back = random_buffer(rng, SMALL.width_px, SMALL.height_px)
        out = composite(front, back, SMALL, Viewpoint()).buffer
        assert (out.rgb == 1.0).all()

    def test_ambient_passthrough_when_both_black(self):
        front = PixelBuffer.blank(SMALL.width_px, SMALL.height_px)
        back = PixelBuffer.blank(SMALL.width_px, SMALL.height_px)
        model = OpticalModel(ambient=Color(0.2, 0.4, 0.1))
        out = composite(front, back, SMALL, Viewpoint(), model).buffer
        assert (out.rgb[..., 0] == 0.2).all()
        assert (out.rgb[..., 1] == 0.4).all()
        assert (out.rgb[..., 2] == 0.1).all()

    def test_matches_raycast_oracle_random(self):
        rng = np.random.default_rng(54)
        for _ in range(5):
            front = random_buffer(rng, SMALL.width_px, SMALL.height_px)
            back = random_buffer(rng, SMALL.width_px, SMALL.height_px)
            eye = (float(rng.uniform(-0.6, 0.6)), float(rng.uniform(-0.4, 0.4)),
                   float(rng.uniform(0.4, 3.0)))
            ambient = tuple(float(a) for a in rng.uniform(0, 0.4, 3))
            out = composite(front, back, SMALL, Viewpoint(*eye),
                            OpticalModel(Color(*ambient))).buffer
            oracle = raycast_composite(front, back, SMALL, eye, ambient)
            assert np.abs(out.rgb - oracle).max() < 1e-6

    def test_energy_bound(self):
        rng = np.random.default_rng(55)
        front = random_buffer(rng, 32, 18)
        back = random_buffer(rng, 32, 18)
        g = DisplayGeometry(32, 18, 1.218, 0.685, 0.72)
        out = composite(front, back, g, Viewpoint(),
                        OpticalModel(Color(1, 1, 1))).buffer
        assert out.data.min() >= 0.0
        assert out.data.max() <= 1.0

    def test_dimension_mismatch(self):
        front = PixelBuffer.blank(10, 10)
        back = PixelBuffer.blank(SMALL.width_px, SMALL.height_px)
        with pytest.raises(DomainError):
            composite(front, back, SMALL, Viewpoint())

    def test_metadata_provenance(self):
        front = PixelBuffer.blank(SMALL.width_px, SMALL.height_px)
        frame = composite(front, front, SMALL, Viewpoint(0.1, 0.0, 2.0), tick=17)
        assert frame.tick == 17
        assert frame.eye == (0.1, 0.0, 2.0)
        assert frame.separation_m == 0.72


def opaque_square(n: int, color=(0.8, 0.2, 0.2)) -> PixelBuffer:
    data = np.zeros((n, n, 4))
    data[..., 0], data[..., 1], data[..., 2] = color
    data[..., 3] = 1.0
    return PixelBuffer(data)


def entity(frame: PixelBuffer, state: LayerRenderState, *, center=(0.0, 0.0),
           size_m=None, scale=1.0, alpha=1.0, style=LinkingStyle.NONE,
           linking=None) -> SceneEntity:
    g = SMALL
    if size_m is None:
        size_m = (frame.width_px * g.m_per_px_x, frame.height_px * g.m_per_px_y)
    return SceneEntity(
        name="e", frame=frame, center_m=center, nominal_size_m=size_m,
        base_scale=scale, base_alpha=alpha, state=state,
        linking_style=style, linking=linking or LinkingParams())


class TestRenderLayers:
    def test_identity_placement_is_bit_exact(self):
        # 8x6 sprite, native pixel size, centered on a pixel boundary grid.
        data = np.zeros((6, 8, 4))
        rng = np.random.default_rng(56)
        data[..., :3] = rng.random((6, 8, 3))
        data[..., 3] = 1.0
        sprite = PixelBuffer(data)
        st = LayerRenderState(front=RenderParams(alpha=1.0), back=REST_HIDDEN)
        front, back = render_layers([entity(sprite, st)], SMALL)
        left = SMALL.width_px // 2 - 4
        top = SMALL.height_px // 2 - 3
        region = front.data[top : top + 6, left : left + 8]
        assert np.array_equal(region, sprite.data)
        assert front.alpha.sum() == 6 * 8  # nothing else drawn
        assert back.alpha.sum() == 0.0

    def test_alpha_zero_is_empty(self):
        sprite = opaque_square(8)
        st = LayerRenderState(front=RenderParams(alpha=0.0), back=REST_HIDDEN)
        front, back = render_layers([entity(sprite, st)], SMALL)
        assert front.data.sum() == 0.0

    def test_scale_two_on_single_pixel_dot(self):
        # Oracle: bilinear resampling of a 1x1 source covers all four output
        # pixels at full value.
        dot = opaque_square(1, color=(1.0, 1.0, 1.0))
        assert np.array_equal(resample_bilinear(dot, 2, 2).data,
                              np.ones((2, 2, 4)))
        st = LayerRenderState(front=RenderParams(alpha=1.0, scale=2.0), back=REST_HIDDEN)
        front, _ = render_layers([entity(dot, st)], SMALL)
        assert (front.alpha > 0).sum() == 4

    def test_shadow_beneath_entity(self):
        sprite = opaque_square(6)
        st = LayerRenderState(front=RenderParams(alpha=1.0, shadow=0.8), back=REST_HIDDEN)
        front, _ = render_layers([entity(sprite, st)], SMALL)
        left = SMALL.width_px // 2 - 3
        top = SMALL.height_px // 2 - 3
        # Shadow geometry is the sprite mask shifted by (8, 8); the sprite is
        # only 6 px wide so the shadow is fully clear of it.
        peek = front.data[top + 8 + 2, left + 8 + 2]
        assert peek[3] == pytest.approx(0.8 * 0.5)
        assert tuple(peek[:3]) == (0.0, 0.0, 0.0)

    def test_declaration_order_over_blend(self):
        a = opaque_square(6, color=(1.0, 0.0, 0.0))
        b = opaque_square(6, color=(0.0, 1.0, 0.0))
        st = LayerRenderState(front=RenderParams(alpha=1.0), back=REST_HIDDEN)
        front, _ = render_layers([entity(a, st), entity(b, st)], SMALL)
        cx, cy = SMALL.width_px // 2, SMALL.height_px // 2
        assert front.data[cy, cx, 1] == 1.0  # later entity wins

    def test_offset_moves_entity(self):
        sprite = opaque_square(4)
        shift = (4 * SMALL.m_per_px_x, 0.0)
        st = LayerRenderState(
            front=RenderParams(alpha=1.0, offset_m=shift), back=REST_HIDDEN)
        moved, _ = render_layers([entity(sprite, st)], SMALL)
        st0 = LayerRenderState(front=RenderParams(alpha=1.0), back=REST_HIDDEN)
        base, _ = render_layers([entity(sprite, st0)], SMALL)
        assert np.array_equal(moved.data[:, 4:], base.data[:, :-4])

    def test_linking_overlay_lands_on_back_layer(self):
        sprite = opaque_square(6)
        st = LayerRenderState(front=RenderParams(alpha=1.0), back=REST_HIDDEN)
        params = LinkingParams(halo_radius_px=2, halo_blur_px=0, tint=Color(1, 1, 0))
        front, back = render_layers(
            [entity(sprite, st, style=LinkingStyle.HALO, linking=params)], SMALL)
        assert back.alpha.sum() > 0
        # Halo hugs the sprite's bounding box on the back layer.
        ys, xs = np.nonzero(back.alpha > 0)
        assert xs.min() >= SMALL.width_px // 2 - 3 - 2
        assert xs.max() <= SMALL.width_px // 2 + 2 + 2

    def test_linking_fades_with_entity(self):
        sprite = opaque_square(6)
        dim = LayerRenderState(front=RenderParams(alpha=0.5), back=REST_HIDDEN)
        params = LinkingParams(halo_radius_px=2, halo_blur_px=0, tint=Color(1, 1, 0))
        _, back = render_layers(
            [entity(sprite, dim, style=LinkingStyle.HALO, linking=params)], SMALL)
        assert back.alpha.max() == pytest.approx(0.5)

    def test_viewer_corrected_linking_shifts_overlay(self):
        sprite = opaque_square(6)
        st = LayerRenderState(front=RenderParams(alpha=1.0), back=REST_HIDDEN)
        params = LinkingParams(halo_radius_px=1, halo_blur_px=0, tint=Color(1, 1, 0))
        ent = entity(sprite, st, center=(0.2, 0.0), style=LinkingStyle.HALO, linking=params)
        eye = Viewpoint(-0.3, 0.0, 1.0)
        _, on_axis = render_layers([ent], SMALL)
        _, corrected = render_layers([ent], SMALL, viewpoint=eye,
                                     viewer_corrected_linking=True)
        xs_on = np.nonzero(on_axis.alpha > 0)[1]
        xs_corr = np.nonzero(corrected.alpha > 0)[1]
        # Eye left of the entity pushes the aligned back visual rightward.
        assert xs_corr.mean() > xs_on.mean()
