#include "mdsnet/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "mdsnet/error.hpp"

namespace mdsnet {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Wave {
    double amplitude, freq, phase;
    double eval(double t) const { return amplitude * std::sin(2.0 * kPi * freq * t + phase); }
};

Wave draw_wave(Rng& rng, double amplitude) {
    return {amplitude, 1.0 + std::floor(rng.uniform() * 3.0), rng.uniform(0.0, 2.0 * kPi)};
}

struct Blob {
    double cz, cy, cx, rz, ry, rx, delta;
};

}  // namespace

std::pair<Volume, Volume> generate_phantom(std::uint64_t seed, std::size_t d, std::size_t l,
                                           std::size_t w, double shape_variability) {
    require(d >= 16 && l >= 16 && w >= 16, "phantom dims must be >= 16 per axis, got ", d, "x", l,
            "x", w);
    require(shape_variability >= 0.0, "shape_variability must be >= 0");

    Rng rng(seed);
    const double var = shape_variability;
    const double base = static_cast<double>(std::min(l, w));
    const double ry0 = 0.13 * base;
    const double rx0 = 0.085 * base;

    // Per-slice deformation of the swept ellipsoid; every deviation scales
    // with shape_variability so var = 0 degenerates to a straight cylinder.
    const Wave drift_y = draw_wave(rng, var * 0.10 * static_cast<double>(l));
    const Wave drift_x = draw_wave(rng, var * 0.10 * static_cast<double>(w));
    const Wave rad_y = draw_wave(rng, var * 0.5);
    const Wave rad_x = draw_wave(rng, var * 0.5);
    const Wave twist = draw_wave(rng, var * 0.5 * kPi);

    const std::size_t n_blobs = 4;
    std::vector<Blob> blobs;
    for (std::size_t i = 0; i < n_blobs; ++i) {
        Blob b;
        b.cz = rng.uniform(0.1, 0.9) * static_cast<double>(d);
        b.cy = rng.uniform(0.1, 0.9) * static_cast<double>(l);
        b.cx = rng.uniform(0.1, 0.9) * static_cast<double>(w);
        b.rz = rng.uniform(0.4, 0.9) * ry0;
        b.ry = rng.uniform(0.4, 0.9) * ry0;
        b.rx = rng.uniform(0.4, 0.9) * rx0;
        b.delta = rng.uniform(0.10, 0.18);
        blobs.push_back(b);
    }

    // Low-frequency texture waves over the whole volume.
    struct Texture {
        double kz, ky, kx, phase, amp;
    };
    std::vector<Texture> textures;
    for (std::size_t i = 0; i < 3; ++i) {
        Texture t;
        t.kz = 1.0 + std::floor(rng.uniform() * 4.0);
        t.ky = 1.0 + std::floor(rng.uniform() * 4.0);
        t.kx = 1.0 + std::floor(rng.uniform() * 4.0);
        t.phase = rng.uniform(0.0, 2.0 * kPi);
        t.amp = 0.04;
        textures.push_back(t);
    }

    Volume label(d, l, w, VolumeKind::label);
    Volume image(d, l, w, VolumeKind::image);

    for (std::size_t z = 0; z < d; ++z) {
        const double t = static_cast<double>(z) / static_cast<double>(d);
        const double cy = 0.5 * static_cast<double>(l) + drift_y.eval(t);
        const double cx = 0.5 * static_cast<double>(w) + drift_x.eval(t);
        const double ry = ry0 * (1.0 + rad_y.eval(t));
        const double rx = rx0 * (1.0 + rad_x.eval(t));
        const double theta = twist.eval(t);
        const double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t y = 0; y < l; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const double dy = static_cast<double>(y) - cy;
                const double dx = static_cast<double>(x) - cx;
                const double u = c * dy + s * dx;
                const double v = -s * dy + c * dx;
                const double q = (u / ry) * (u / ry) + (v / rx) * (v / rx);
                if (q <= 1.0) label.at(z, y, x) = 1.0;
            }
        }
    }

    for (std::size_t z = 0; z < d; ++z) {
        const double tz = static_cast<double>(z) / static_cast<double>(d);
        for (std::size_t y = 0; y < l; ++y) {
            const double ty = static_cast<double>(y) / static_cast<double>(l);
            for (std::size_t x = 0; x < w; ++x) {
                const double tx = static_cast<double>(x) / static_cast<double>(w);
                double v = 0.35;
                if (label.at(z, y, x) != 0.0) {
                    v += 0.30;
                } else {
                    for (const Blob& b : blobs) {
                        const double qz = (static_cast<double>(z) - b.cz) / b.rz;
                        const double qy = (static_cast<double>(y) - b.cy) / b.ry;
                        const double qx = (static_cast<double>(x) - b.cx) / b.rx;
                        if (qz * qz + qy * qy + qx * qx <= 1.0) {
                            v += b.delta;
                            break;
                        }
                    }
                }
                for (const Texture& tex : textures) {
                    v += tex.amp *
                         std::sin(2.0 * kPi * (tex.kz * tz + tex.ky * ty + tex.kx * tx) + tex.phase);
                }
                v += rng.normal(0.0, 0.05);
                image.at(z, y, x) = v;
            }
        }
    }

    // Min-max normalize the image to [0, 1].
    const auto [mn_it, mx_it] = std::minmax_element(image.voxels.begin(), image.voxels.end());
    const double mn = *mn_it, mx = *mx_it;
    const double scale = mx > mn ? 1.0 / (mx - mn) : 1.0;
    for (double& v : image.voxels) v = (v - mn) * scale;

    return {std::move(image), std::move(label)};
}

}  // namespace mdsnet
