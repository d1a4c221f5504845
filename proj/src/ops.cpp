#include "graphage/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace graphage {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

void maybe_record(std::function<void()> step) {
    Tape::active()->record(std::move(step));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out(i) = a(i) + b(i);
    out.check_finite("add");
    if (recording(a, b)) {
        out.set_requires_grad(true);
        maybe_record([a, b, out]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) { auto& ga = a.grad(); for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; }
            if (b.requires_grad()) { auto& gb = b.grad(); for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i]; }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out(i) = a(i) - b(i);
    out.check_finite("sub");
    if (recording(a, b)) {
        out.set_requires_grad(true);
        maybe_record([a, b, out]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) { auto& ga = a.grad(); for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; }
            if (b.requires_grad()) { auto& gb = b.grad(); for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i]; }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out(i) = a(i) * b(i);
    out.check_finite("mul");
    if (recording(a, b)) {
        out.set_requires_grad(true);
        maybe_record([a, b, out]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) { auto& ga = a.grad(); for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b(i); }
            if (b.requires_grad()) { auto& gb = b.grad(); for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a(i); }
        });
    }
    return out;
}

Tensor scale(const Tensor& x, double c) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out(i) = x(i) * c;
    out.check_finite("scale");
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out, c]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * c;
        });
    }
    return out;
}

Tensor add_scalar(const Tensor& x, double c) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out(i) = x(i) + c;
    out.check_finite("add_scalar");
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
    }
    return out;
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
    if (s.size() != 1) throw ShapeError("scale_by: scalar tensor expected, got " + shape_str(s.shape()));
    double c = s(0);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out(i) = x(i) * c;
    out.check_finite("scale_by");
    if (recording(x, s)) {
        out.set_requires_grad(true);
        maybe_record([x, s, out, c]() mutable {
            const auto& g = out.grad();
            if (x.requires_grad()) {
                auto& gx = x.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * c;
            }
            if (s.requires_grad()) {
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x(i);
                s.grad()[0] += acc;
            }
        });
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    const std::size_t r = a.dim(0), k = a.dim(1), c = b.dim(1);
    Tensor out(Shape{r, c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
            double av = a(i, t);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < c; ++j) out(i, j) += av * b(t, j);
        }
    }
    out.check_finite("matmul");
    if (recording(a, b)) {
        out.set_requires_grad(true);
        maybe_record([a, b, out, r, k, c]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {  // dA = G * B^T
                auto& ga = a.grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t t = 0; t < k; ++t) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < c; ++j) acc += g[i * c + j] * b(t, j);
                        ga[i * k + t] += acc;
                    }
            }
            if (b.requires_grad()) {  // dB = A^T * G
                auto& gb = b.grad();
                for (std::size_t t = 0; t < k; ++t)
                    for (std::size_t i = 0; i < r; ++i) {
                        double av = a(i, t);
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < c; ++j) gb[t * c + j] += av * g[i * c + j];
                    }
            }
        });
    }
    return out;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    if (slope <= 0.0 || slope >= 1.0) {
        throw ConfigError("leaky_relu: slope must lie in (0,1), got " + std::to_string(slope));
    }
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out(i) = x(i) > 0.0 ? x(i) : slope * x(i);
    out.check_finite("leaky_relu");
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out, slope]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (x(i) > 0.0 ? 1.0 : slope);
        });
    }
    return out;
}

Tensor hinge_pos(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out(i) = x(i) > 0.0 ? x(i) : 0.0;
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x(i) > 0.0) gx[i] += g[i];
        });
    }
    return out;
}

Tensor hinge_neg(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out(i) = x(i) < 0.0 ? x(i) : 0.0;
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x(i) < 0.0) gx[i] += g[i];
        });
    }
    return out;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
    }
    if (!training || rate == 0.0) return x;  // identity, bit-exact
    const double keep_scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(x.size());
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double m = uniform(rng) < rate ? 0.0 : keep_scale;
        (*mask)[i] = m;
        out(i) = x(i) * m;
    }
    out.check_finite("dropout");
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out, mask]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
        });
    }
    return out;
}

Tensor conv2d(const Tensor& image, const Tensor& kernels, std::size_t stride) {
    if (image.rank() != 3 || kernels.rank() != 4) {
        throw ShapeError("conv2d: expected image [h,w,c] and kernels [k,k,c,f], got " +
                         shape_str(image.shape()) + " and " + shape_str(kernels.shape()));
    }
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
    const std::size_t k = kernels.dim(0), f = kernels.dim(3);
    if (kernels.dim(1) != k || kernels.dim(2) != c) {
        throw ShapeError("conv2d: kernel shape " + shape_str(kernels.shape()) +
                         " inconsistent with image " + shape_str(image.shape()));
    }
    if (k > h || k > w) {
        throw ShapeError("conv2d: kernel " + shape_str(kernels.shape()) +
                         " larger than image " + shape_str(image.shape()));
    }
    if (stride == 0) throw ConfigError("conv2d: stride must be positive");
    const std::size_t oh = (h - k) / stride + 1;
    const std::size_t ow = (w - k) / stride + 1;

    Tensor out(Shape{oh, ow, f});
    const double* im = image.data();
    const double* ke = kernels.data();
    double* o = out.data();
    for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox)
            for (std::size_t ky = 0; ky < k; ++ky)
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const double* ipix = im + ((oy * stride + ky) * w + (ox * stride + kx)) * c;
                    const double* kpix = ke + (ky * k + kx) * c * f;
                    double* opix = o + (oy * ow + ox) * f;
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        double iv = ipix[ci];
                        if (iv == 0.0) continue;
                        const double* kf = kpix + ci * f;
                        for (std::size_t fi = 0; fi < f; ++fi) opix[fi] += iv * kf[fi];
                    }
                }
    out.check_finite("conv2d");
    if (recording(image, kernels)) {
        out.set_requires_grad(true);
        maybe_record([image, kernels, out, h, w, c, k, f, oh, ow, stride]() mutable {
            const auto& g = out.grad();
            const double* im = image.data();
            const double* ke = kernels.data();
            double* gi = image.requires_grad() ? image.grad().data() : nullptr;
            double* gk = kernels.requires_grad() ? kernels.grad().data() : nullptr;
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox)
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            std::size_t ioff = ((oy * stride + ky) * w + (ox * stride + kx)) * c;
                            std::size_t koff = (ky * k + kx) * c * f;
                            const double* gpix = g.data() + (oy * ow + ox) * f;
                            for (std::size_t ci = 0; ci < c; ++ci) {
                                if (gi) {
                                    double acc = 0.0;
                                    for (std::size_t fi = 0; fi < f; ++fi)
                                        acc += gpix[fi] * ke[koff + ci * f + fi];
                                    gi[ioff + ci] += acc;
                                }
                                if (gk) {
                                    double iv = im[ioff + ci];
                                    if (iv == 0.0) continue;
                                    for (std::size_t fi = 0; fi < f; ++fi)
                                        gk[koff + ci * f + fi] += iv * gpix[fi];
                                }
                            }
                        }
        });
    }
    return out;
}

Tensor softmax_groups(const Tensor& scores, const std::vector<std::vector<std::size_t>>& groups) {
    std::vector<char> seen(scores.size(), 0);
    std::size_t covered = 0;
    for (const auto& g : groups) {
        if (g.empty()) throw ConfigError("softmax_groups: empty group");
        for (std::size_t idx : g) {
            if (idx >= scores.size() || seen[idx])
                throw ConfigError("softmax_groups: groups must partition the indices");
            seen[idx] = 1;
            ++covered;
        }
    }
    if (covered != scores.size())
        throw ConfigError("softmax_groups: groups must cover all indices");

    Tensor out(scores.shape());
    for (const auto& g : groups) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t idx : g) mx = std::max(mx, scores(idx));
        double denom = 0.0;
        for (std::size_t idx : g) denom += std::exp(scores(idx) - mx);
        for (std::size_t idx : g) out(idx) = std::exp(scores(idx) - mx) / denom;
    }
    out.check_finite("softmax_groups");
    if (recording(scores)) {
        out.set_requires_grad(true);
        maybe_record([scores, out, groups]() mutable {
            const auto& g = out.grad();
            auto& gs = scores.grad();
            for (const auto& grp : groups) {
                double dot = 0.0;
                for (std::size_t idx : grp) dot += g[idx] * out(idx);
                for (std::size_t idx : grp) gs[idx] += out(idx) * (g[idx] - dot);
            }
        });
    }
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
        throw ShapeError("concat_cols: incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    const std::size_t n = a.dim(0), p = a.dim(1), q = b.dim(1);
    Tensor out(Shape{n, p + q});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) out(i, j) = a(i, j);
        for (std::size_t j = 0; j < q; ++j) out(i, p + j) = b(i, j);
    }
    if (recording(a, b)) {
        out.set_requires_grad(true);
        maybe_record([a, b, out, n, p, q]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < p; ++j) ga[i * p + j] += g[i * (p + q) + j];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < q; ++j) gb[i * q + j] += g[i * (p + q) + p + j];
            }
        });
    }
    return out;
}

Tensor vstack(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ShapeError("vstack: no blocks");
    const std::size_t d = rows.front().rank() == 2 ? rows.front().dim(1) : 0;
    std::size_t total = 0;
    bool rg = false;
    for (const auto& r : rows) {
        if (r.rank() != 2 || r.dim(1) != d)
            throw ShapeError("vstack: inconsistent block shape " + shape_str(r.shape()));
        total += r.dim(0);
        rg = rg || r.requires_grad();
    }
    Tensor out(Shape{total, d});
    std::size_t off = 0;
    for (const auto& r : rows) {
        std::copy(r.data(), r.data() + r.size(), out.data() + off);
        off += r.size();
    }
    if (Tape::active() && rg) {
        out.set_requires_grad(true);
        maybe_record([rows, out]() mutable {
            const auto& g = out.grad();
            std::size_t off = 0;
            for (auto& r : rows) {
                if (r.requires_grad()) {
                    auto& gr = r.grad();
                    for (std::size_t i = 0; i < r.size(); ++i) gr[i] += g[off + i];
                }
                off += r.size();
            }
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& indices) {
    if (x.rank() != 2) throw ShapeError("gather_rows: expected matrix, got " + shape_str(x.shape()));
    const std::size_t d = x.dim(1);
    for (std::size_t idx : indices)
        if (idx >= x.dim(0)) throw ShapeError("gather_rows: row index out of range");
    Tensor out(Shape{indices.size(), d});
    for (std::size_t i = 0; i < indices.size(); ++i)
        std::copy(x.data() + indices[i] * d, x.data() + (indices[i] + 1) * d, out.data() + i * d);
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out, indices, d]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < indices.size(); ++i)
                for (std::size_t j = 0; j < d; ++j) gx[indices[i] * d + j] += g[i * d + j];
        });
    }
    return out;
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
    if (x.rank() != 2 || s.size() != x.dim(0)) {
        throw ShapeError("scale_rows: need [m,d] and [m], got " + shape_str(x.shape()) +
                         " and " + shape_str(s.shape()));
    }
    const std::size_t m = x.dim(0), d = x.dim(1);
    Tensor out(Shape{m, d});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) out(i, j) = x(i, j) * s(i);
    out.check_finite("scale_rows");
    if (recording(x, s)) {
        out.set_requires_grad(true);
        maybe_record([x, s, out, m, d]() mutable {
            const auto& g = out.grad();
            if (x.requires_grad()) {
                auto& gx = x.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * d + j] * s(i);
            }
            if (s.requires_grad()) {
                auto& gs = s.grad();
                for (std::size_t i = 0; i < m; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < d; ++j) acc += g[i * d + j] * x(i, j);
                    gs[i] += acc;
                }
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x(i);
    Tensor out = Tensor::scalar(acc);
    out.check_finite("sum");
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out]() mutable {
            double g = out.grad()[0];
            auto& gx = x.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor colwise_mean(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("colwise_mean: expected matrix, got " + shape_str(x.shape()));
    const std::size_t m = x.dim(0), d = x.dim(1);
    Tensor out(Shape{1, d});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) out(0, j) += x(i, j);
    for (std::size_t j = 0; j < d; ++j) out(0, j) /= static_cast<double>(m);
    out.check_finite("colwise_mean");
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out, m, d]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            const double inv = 1.0 / static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[j] * inv;
        });
    }
    return out;
}

Tensor colwise_max(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("colwise_max: expected matrix, got " + shape_str(x.shape()));
    const std::size_t m = x.dim(0), d = x.dim(1);
    auto argmax = std::make_shared<std::vector<std::size_t>>(d, 0);
    Tensor out(Shape{1, d});
    for (std::size_t j = 0; j < d; ++j) {
        double best = x(0, j);
        for (std::size_t i = 1; i < m; ++i)
            if (x(i, j) > best) { best = x(i, j); (*argmax)[j] = i; }
        out(0, j) = best;
    }
    out.check_finite("colwise_max");
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out, argmax, d]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t j = 0; j < d; ++j) gx[(*argmax)[j] * d + j] += g[j];
        });
    }
    return out;
}

Tensor spatial_mean(const Tensor& x) {
    if (x.rank() != 3) throw ShapeError("spatial_mean: expected [h,w,c], got " + shape_str(x.shape()));
    const std::size_t hw = x.dim(0) * x.dim(1), c = x.dim(2);
    Tensor out(Shape{1, c});
    for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t ci = 0; ci < c; ++ci) out(0, ci) += x(p * c + ci);
    for (std::size_t ci = 0; ci < c; ++ci) out(0, ci) /= static_cast<double>(hw);
    out.check_finite("spatial_mean");
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out, hw, c]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            const double inv = 1.0 / static_cast<double>(hw);
            for (std::size_t p = 0; p < hw; ++p)
                for (std::size_t ci = 0; ci < c; ++ci) gx[p * c + ci] += g[ci] * inv;
        });
    }
    return out;
}

Tensor row_distance_sq(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "row_distance_sq");
    if (a.rank() != 2) throw ShapeError("row_distance_sq: expected matrices, got " + shape_str(a.shape()));
    const std::size_t n = a.dim(0), d = a.dim(1);
    Tensor out(Shape{n});
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double diff = a(i, j) - b(i, j);
            acc += diff * diff;
        }
        out(i) = acc;
    }
    out.check_finite("row_distance_sq");
    if (recording(a, b)) {
        out.set_requires_grad(true);
        maybe_record([a, b, out, n, d]() mutable {
            const auto& g = out.grad();
            for (std::size_t i = 0; i < n; ++i) {
                double gi = 2.0 * g[i];
                for (std::size_t j = 0; j < d; ++j) {
                    double diff = a(i, j) - b(i, j);
                    if (a.requires_grad()) a.grad()[i * d + j] += gi * diff;
                    if (b.requires_grad()) b.grad()[i * d + j] -= gi * diff;
                }
            }
        });
    }
    return out;
}

Tensor mask_zero_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
    if (x.rank() != 2) throw ShapeError("mask_zero_rows: expected matrix, got " + shape_str(x.shape()));
    const std::size_t d = x.dim(1);
    std::vector<char> masked(x.dim(0), 0);
    for (std::size_t r : rows) {
        if (r >= x.dim(0)) throw ShapeError("mask_zero_rows: row index out of range");
        masked[r] = 1;
    }
    Tensor out(x.shape(), std::vector<double>(x.values()));
    for (std::size_t r : rows) std::fill(out.data() + r * d, out.data() + (r + 1) * d, 0.0);
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out, masked, d]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < masked.size(); ++i) {
                if (masked[i]) continue;
                for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * d + j];
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
    Tensor out(std::move(new_shape), std::vector<double>(x.values()));
    if (out.size() != x.size()) {
        throw ShapeError("reshape: element count mismatch " + shape_str(x.shape()) +
                         " -> " + shape_str(out.shape()));
    }
    if (recording(x)) {
        out.set_requires_grad(true);
        maybe_record([x, out]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
    }
    return out;
}

double grad_check(const std::function<Tensor(std::vector<Tensor>&)>& fn,
                  std::vector<Tensor>& inputs, double eps) {
    if (eps <= 0.0) throw ConfigError("grad_check: eps must be positive");
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        for (auto& in : inputs) { in.set_requires_grad(true); in.zero_grad(); }
        Tensor out = fn(inputs);
        if (out.size() != 1)
            throw ShapeError("grad_check: function must return a scalar, got " + shape_str(out.shape()));
        out.zero_grad();
        tape.backward(out);
        for (auto& in : inputs) analytic.push_back(in.grad());
    }
    double worst = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        Tensor& in = inputs[t];
        in.set_requires_grad(false);
        for (std::size_t i = 0; i < in.size(); ++i) {
            const double orig = in(i);
            in(i) = orig + eps;
            double fp = fn(inputs).item();
            in(i) = orig - eps;
            double fm = fn(inputs).item();
            in(i) = orig;
            double cd = (fp - fm) / (2.0 * eps);
            double a = analytic[t][i];
            double rel = std::fabs(a - cd) / std::max({std::fabs(a), std::fabs(cd), 1e-8});
            worst = std::max(worst, rel);
        }
        in.set_requires_grad(true);
    }
    return worst;
}

}  // namespace graphage
