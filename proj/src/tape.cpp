#include "crackdet/tape.hpp"

#include <cassert>
#include <cmath>
#include <memory>

namespace crackdet::ad {

namespace {

void check_finite(const Eigen::ArrayXd& a) {
#ifndef NDEBUG
    assert(a.isFinite().all() && "non-finite value produced by tape op");
#else
    (void)a;
#endif
}

inline Eigen::Index plane_offset(const Shape& s, int n, int c) {
    return (static_cast<Eigen::Index>(n) * s.c + c) * s.h * s.w;
}

}  // namespace

Var Tape::make(Shape shape, Eigen::ArrayXd value, std::vector<Var> parents, PullFn pull) {
    if (value.size() != shape.count()) throw ShapeMismatch("op produced wrong element count");
    check_finite(value);
    bool ng = false;
    for (Var p : parents) ng = ng || nodes_[p.id].needs_grad;
    return push(Tensor(shape, std::move(value)), ng, nullptr, ng ? std::move(pull) : PullFn{});
}

void Tape::backward(Var root) {
    if (nodes_[root.id].shape.count() != 1)
        throw ShapeMismatch("backward root must be scalar");
    for (int i = 0; i <= root.id; ++i) {
        Node& n = nodes_[i];
        if (n.needs_grad) n.grad = Eigen::ArrayXd::Zero(n.shape.count());
    }
    nodes_[root.id].grad[0] = 1.0;
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.needs_grad && n.pull) n.pull(*this, Var{i});
    }
    for (int i = 0; i <= root.id; ++i) {
        Node& n = nodes_[i];
        if (n.bound && n.needs_grad) n.bound->grad += n.grad;
    }
}

// --- convolution -------------------------------------------------------------

namespace {

struct ConvDims {
    int n, ci, ih, iw;
    int oc, k;
    int oh, ow;
    int stride, pad;
};

ConvDims conv_dims(const Shape& xs, const Shape& ws, int stride, int pad) {
    if (ws.h != ws.w || (ws.h != 1 && ws.h != 3))
        throw ShapeMismatch("conv kernel must be 1x1 or 3x3");
    if (ws.c != xs.c)
        throw ShapeMismatch("conv channel mismatch: input " + xs.str() + " weight " + ws.str());
    ConvDims d;
    d.n = xs.n;
    d.ci = xs.c;
    d.ih = xs.h;
    d.iw = xs.w;
    d.oc = ws.n;
    d.k = ws.h;
    d.stride = stride;
    d.pad = pad < 0 ? (d.k - 1) / 2 : pad;
    d.oh = (d.ih + 2 * d.pad - d.k) / stride + 1;
    d.ow = (d.iw + 2 * d.pad - d.k) / stride + 1;
    if (d.oh <= 0 || d.ow <= 0) throw ShapeMismatch("conv output would be empty");
    return d;
}

// out[n,oc,:,:] = b[oc] + sum_{ic,ky,kx} w * shifted x. The accumulation
// order over (ic,ky,kx) is identical in the strided and unit-stride paths.
void conv_forward(const double* x, const double* w, const double* b, double* out, const ConvDims& d) {
    const Shape xs{d.n, d.ci, d.ih, d.iw}, os{d.n, d.oc, d.oh, d.ow};
    for (int n = 0; n < d.n; ++n) {
        for (int oc = 0; oc < d.oc; ++oc) {
            double* op = out + plane_offset(os, n, oc);
            const double bias = b[oc];
            for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d.oh) * d.ow; ++i) op[i] = bias;
            for (int ic = 0; ic < d.ci; ++ic) {
                const double* xp = x + plane_offset(xs, n, ic);
                const double* wp = w + ((static_cast<Eigen::Index>(oc) * d.ci + ic) * d.k) * d.k;
                for (int ky = 0; ky < d.k; ++ky) {
                    for (int kx = 0; kx < d.k; ++kx) {
                        const double wv = wp[ky * d.k + kx];
                        if (d.stride == 1) {
                            const int oy0 = std::max(0, d.pad - ky);
                            const int oy1 = std::min(d.oh, d.ih + d.pad - ky);
                            const int ox0 = std::max(0, d.pad - kx);
                            const int ox1 = std::min(d.ow, d.iw + d.pad - kx);
                            for (int oy = oy0; oy < oy1; ++oy) {
                                double* orow = op + static_cast<Eigen::Index>(oy) * d.ow + ox0;
                                const double* xrow =
                                    xp + static_cast<Eigen::Index>(oy + ky - d.pad) * d.iw + (ox0 + kx - d.pad);
                                for (int i = 0; i < ox1 - ox0; ++i) orow[i] += wv * xrow[i];
                            }
                        } else {
                            for (int oy = 0; oy < d.oh; ++oy) {
                                const int iy = oy * d.stride + ky - d.pad;
                                if (iy < 0 || iy >= d.ih) continue;
                                for (int ox = 0; ox < d.ow; ++ox) {
                                    const int ix = ox * d.stride + kx - d.pad;
                                    if (ix < 0 || ix >= d.iw) continue;
                                    op[static_cast<Eigen::Index>(oy) * d.ow + ox] +=
                                        wv * xp[static_cast<Eigen::Index>(iy) * d.iw + ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv_backward_input(const double* dout, const double* w, double* dx, const ConvDims& d) {
    const Shape xs{d.n, d.ci, d.ih, d.iw}, os{d.n, d.oc, d.oh, d.ow};
    for (int n = 0; n < d.n; ++n) {
        for (int oc = 0; oc < d.oc; ++oc) {
            const double* gp = dout + plane_offset(os, n, oc);
            for (int ic = 0; ic < d.ci; ++ic) {
                double* dxp = dx + plane_offset(xs, n, ic);
                const double* wp = w + ((static_cast<Eigen::Index>(oc) * d.ci + ic) * d.k) * d.k;
                for (int ky = 0; ky < d.k; ++ky) {
                    for (int kx = 0; kx < d.k; ++kx) {
                        const double wv = wp[ky * d.k + kx];
                        if (d.stride == 1) {
                            const int oy0 = std::max(0, d.pad - ky);
                            const int oy1 = std::min(d.oh, d.ih + d.pad - ky);
                            const int ox0 = std::max(0, d.pad - kx);
                            const int ox1 = std::min(d.ow, d.iw + d.pad - kx);
                            for (int oy = oy0; oy < oy1; ++oy) {
                                const double* grow = gp + static_cast<Eigen::Index>(oy) * d.ow + ox0;
                                double* dxrow =
                                    dxp + static_cast<Eigen::Index>(oy + ky - d.pad) * d.iw + (ox0 + kx - d.pad);
                                for (int i = 0; i < ox1 - ox0; ++i) dxrow[i] += wv * grow[i];
                            }
                        } else {
                            for (int oy = 0; oy < d.oh; ++oy) {
                                const int iy = oy * d.stride + ky - d.pad;
                                if (iy < 0 || iy >= d.ih) continue;
                                for (int ox = 0; ox < d.ow; ++ox) {
                                    const int ix = ox * d.stride + kx - d.pad;
                                    if (ix < 0 || ix >= d.iw) continue;
                                    dxp[static_cast<Eigen::Index>(iy) * d.iw + ix] +=
                                        wv * gp[static_cast<Eigen::Index>(oy) * d.ow + ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv_backward_weight(const double* x, const double* dout, double* dw, const ConvDims& d) {
    const Shape xs{d.n, d.ci, d.ih, d.iw}, os{d.n, d.oc, d.oh, d.ow};
    for (int n = 0; n < d.n; ++n) {
        for (int oc = 0; oc < d.oc; ++oc) {
            const double* gp = dout + plane_offset(os, n, oc);
            for (int ic = 0; ic < d.ci; ++ic) {
                const double* xp = x + plane_offset(xs, n, ic);
                double* dwp = dw + ((static_cast<Eigen::Index>(oc) * d.ci + ic) * d.k) * d.k;
                for (int ky = 0; ky < d.k; ++ky) {
                    for (int kx = 0; kx < d.k; ++kx) {
                        double acc = 0.0;
                        if (d.stride == 1) {
                            const int oy0 = std::max(0, d.pad - ky);
                            const int oy1 = std::min(d.oh, d.ih + d.pad - ky);
                            const int ox0 = std::max(0, d.pad - kx);
                            const int ox1 = std::min(d.ow, d.iw + d.pad - kx);
                            for (int oy = oy0; oy < oy1; ++oy) {
                                const double* grow = gp + static_cast<Eigen::Index>(oy) * d.ow + ox0;
                                const double* xrow =
                                    xp + static_cast<Eigen::Index>(oy + ky - d.pad) * d.iw + (ox0 + kx - d.pad);
                                // Eigen's dot vectorizes the row reduction
                                acc += Eigen::Map<const Eigen::VectorXd>(grow, ox1 - ox0)
                                           .dot(Eigen::Map<const Eigen::VectorXd>(xrow, ox1 - ox0));
                            }
                        } else {
                            for (int oy = 0; oy < d.oh; ++oy) {
                                const int iy = oy * d.stride + ky - d.pad;
                                if (iy < 0 || iy >= d.ih) continue;
                                for (int ox = 0; ox < d.ow; ++ox) {
                                    const int ix = ox * d.stride + kx - d.pad;
                                    if (ix < 0 || ix >= d.iw) continue;
                                    acc += gp[static_cast<Eigen::Index>(oy) * d.ow + ox] *
                                           xp[static_cast<Eigen::Index>(iy) * d.iw + ix];
                                }
                            }
                        }
                        dwp[ky * d.k + kx] += acc;
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(Tape& t, Var x, Var w, Var b, int stride, int pad) {
    const Shape xs = t.shape(x), ws = t.shape(w), bs = t.shape(b);
    if (bs.count() != ws.n) throw ShapeMismatch("conv bias must have one value per output channel");
    const ConvDims d = conv_dims(xs, ws, stride, pad);
    const Shape os{d.n, d.oc, d.oh, d.ow};

    Eigen::ArrayXd out(os.count());
    conv_forward(t.value(x).data(), t.value(w).data(), t.value(b).data(), out.data(), d);

    return t.make(os, std::move(out), {x, w, b}, [x, w, b, d, os](Tape& tt, Var self) {
        const Eigen::ArrayXd& g = tt.grad(self);
        if (auto* dx = tt.grad_if_needed(x))
            conv_backward_input(g.data(), tt.value(w).data(), dx->data(), d);
        if (auto* dw = tt.grad_if_needed(w))
            conv_backward_weight(tt.value(x).data(), g.data(), dw->data(), d);
        if (auto* db = tt.grad_if_needed(b)) {
            for (int n = 0; n < d.n; ++n)
                for (int oc = 0; oc < d.oc; ++oc)
                    (*db)[oc] += g.segment(plane_offset(os, n, oc), static_cast<Eigen::Index>(d.oh) * d.ow).sum();
        }
    });
}

// --- pooling -----------------------------------------------------------------

PoolResult maxpool2d(Tape& t, Var x) {
    const Shape xs = t.shape(x);
    if (xs.h % 2 != 0 || xs.w % 2 != 0) throw ShapeMismatch("maxpool needs even spatial dims");
    const Shape os{xs.n, xs.c, xs.h / 2, xs.w / 2};

    PoolIndices indices;
    indices.in_shape = xs;
    indices.out_shape = os;
    indices.idx.resize(static_cast<std::size_t>(os.count()));

    const Eigen::ArrayXd& in = t.value(x);
    Eigen::ArrayXd out(os.count());
    Eigen::Index o = 0;
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const Eigen::Index base = plane_offset(xs, n, c);
            for (int oy = 0; oy < os.h; ++oy) {
                for (int ox = 0; ox < os.w; ++ox, ++o) {
                    Eigen::Index best = base + static_cast<Eigen::Index>(2 * oy) * xs.w + 2 * ox;
                    double bv = in[best];
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const Eigen::Index i =
                                base + static_cast<Eigen::Index>(2 * oy + dy) * xs.w + (2 * ox + dx);
                            if (in[i] > bv) {  // strict: first max wins
                                bv = in[i];
                                best = i;
                            }
                        }
                    out[o] = bv;
                    indices.idx[static_cast<std::size_t>(o)] = best;
                }
            }
        }
    }

    PoolIndices captured = indices;
    Var v = t.make(os, std::move(out), {x}, [x, captured](Tape& tt, Var self) {
        if (auto* dx = tt.grad_if_needed(x)) {
            const Eigen::ArrayXd& g = tt.grad(self);
            for (Eigen::Index i = 0; i < g.size(); ++i)
                (*dx)[captured.idx[static_cast<std::size_t>(i)]] += g[i];
        }
    });
    return {v, std::move(indices)};
}

namespace {

void validate_indices(const PoolIndices& ind) {
    const Shape& xs = ind.in_shape;
    const Shape& os = ind.out_shape;
    if (ind.idx.size() != static_cast<std::size_t>(os.count()))
        throw ShapeMismatch("pool index count does not match pooled shape");
    Eigen::Index o = 0;
    for (int n = 0; n < os.n; ++n)
        for (int c = 0; c < os.c; ++c) {
            const Eigen::Index base = plane_offset(xs, n, c);
            for (int oy = 0; oy < os.h; ++oy)
                for (int ox = 0; ox < os.w; ++ox, ++o) {
                    const Eigen::Index i = ind.idx[static_cast<std::size_t>(o)];
                    const Eigen::Index rel = i - base;
                    const Eigen::Index y = rel / xs.w, x = rel % xs.w;
                    if (rel < 0 || y / 2 != oy || x / 2 != ox)
                        throw IndexOutOfWindow("pool index outside its 2x2 window");
                }
        }
}

}  // namespace

Var max_unpool2d(Tape& t, Var y, const PoolIndices& indices) {
    if (!(t.shape(y) == indices.out_shape))
        throw ShapeMismatch("unpool input shape does not match pool indices");
    validate_indices(indices);

    const Shape os = indices.in_shape;
    const Eigen::ArrayXd& in = t.value(y);
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(os.count());
    for (Eigen::Index i = 0; i < in.size(); ++i)
        out[indices.idx[static_cast<std::size_t>(i)]] = in[i];

    PoolIndices captured = indices;
    return t.make(os, std::move(out), {y}, [y, captured](Tape& tt, Var self) {
        if (auto* dy = tt.grad_if_needed(y)) {
            const Eigen::ArrayXd& g = tt.grad(self);
            for (Eigen::Index i = 0; i < dy->size(); ++i)
                (*dy)[i] += g[captured.idx[static_cast<std::size_t>(i)]];
        }
    });
}

// --- elementwise -------------------------------------------------------------

Var relu(Tape& t, Var x) {
    const Eigen::ArrayXd& in = t.value(x);
    Eigen::ArrayXd out = in.max(0.0);
    return t.make(t.shape(x), std::move(out), {x}, [x](Tape& tt, Var self) {
        if (auto* dx = tt.grad_if_needed(x))
            *dx += (tt.value(x) > 0.0).cast<double>() * tt.grad(self);
    });
}

Eigen::ArrayXd sigmoid_array(const Eigen::ArrayXd& x) {
    Eigen::ArrayXd out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x[i];
        if (v >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
    return out;
}

Var sigmoid(Tape& t, Var x) {
    Eigen::ArrayXd out = sigmoid_array(t.value(x));
    return t.make(t.shape(x), std::move(out), {x}, [x](Tape& tt, Var self) {
        if (auto* dx = tt.grad_if_needed(x)) {
            const Eigen::ArrayXd& s = tt.value(self);
            *dx += s * (1.0 - s) * tt.grad(self);
        }
    });
}

// --- batch normalization -------------------------------------------------------

Var batchnorm(Tape& t, Var x, Var gamma, Var beta, BnStats& stats, bool training) {
    const Shape xs = t.shape(x);
    const int C = xs.c;
    if (t.shape(gamma).count() != C || t.shape(beta).count() != C)
        throw ShapeMismatch("batchnorm gamma/beta must have one value per channel");
    if (stats.running_mean.size() != C)
        throw ShapeMismatch("batchnorm running stats channel mismatch");

    const Eigen::ArrayXd& in = t.value(x);
    const Eigen::Index plane = static_cast<Eigen::Index>(xs.h) * xs.w;
    const double m = static_cast<double>(xs.n) * plane;

    Eigen::ArrayXd mean(C), var(C);
    if (training) {
        for (int c = 0; c < C; ++c) {
            double s = 0.0, s2 = 0.0;
            for (int n = 0; n < xs.n; ++n) {
                const auto seg = in.segment(plane_offset(xs, n, c), plane);
                s += seg.sum();
                s2 += seg.square().sum();
            }
            mean[c] = s / m;
            var[c] = s2 / m - mean[c] * mean[c];
            if (var[c] < 0.0) var[c] = 0.0;  // guard rounding
        }
        stats.running_mean = (1.0 - stats.momentum) * stats.running_mean + stats.momentum * mean;
        stats.running_var = (1.0 - stats.momentum) * stats.running_var + stats.momentum * var;
    } else {
        mean = stats.running_mean;
        var = stats.running_var;
    }

    Eigen::ArrayXd inv_std = (var + stats.eps).sqrt().inverse();
    Eigen::ArrayXd out(xs.count());
    // xhat is kept alive for the pull; the train-mode input gradient needs it
    auto xhat = std::make_shared<Eigen::ArrayXd>(xs.count());
    const Eigen::ArrayXd& gv = t.value(gamma);
    const Eigen::ArrayXd& bv = t.value(beta);
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < C; ++c) {
            const Eigen::Index off = plane_offset(xs, n, c);
            xhat->segment(off, plane) = (in.segment(off, plane) - mean[c]) * inv_std[c];
            out.segment(off, plane) = gv[c] * xhat->segment(off, plane) + bv[c];
        }

    auto inv = std::make_shared<Eigen::ArrayXd>(std::move(inv_std));
    return t.make(xs, std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xs, plane, m, xhat, inv, training](Tape& tt, Var self) {
                      const Eigen::ArrayXd& g = tt.grad(self);
                      const Eigen::ArrayXd& gv = tt.value(gamma);
                      const int C = xs.c;

                      Eigen::ArrayXd sum_g(C), sum_gx(C);
                      for (int c = 0; c < C; ++c) {
                          double s = 0.0, sx = 0.0;
                          for (int n = 0; n < xs.n; ++n) {
                              const Eigen::Index off = plane_offset(xs, n, c);
                              s += g.segment(off, plane).sum();
                              sx += (g.segment(off, plane) * xhat->segment(off, plane)).sum();
                          }
                          sum_g[c] = s;
                          sum_gx[c] = sx;
                      }
                      if (auto* dgamma = tt.grad_if_needed(gamma)) *dgamma += sum_gx;
                      if (auto* dbeta = tt.grad_if_needed(beta)) *dbeta += sum_g;
                      if (auto* dx = tt.grad_if_needed(x)) {
                          for (int n = 0; n < xs.n; ++n)
                              for (int c = 0; c < C; ++c) {
                                  const Eigen::Index off = plane_offset(xs, n, c);
                                  if (training) {
                                      dx->segment(off, plane) +=
                                          gv[c] * (*inv)[c] *
                                          (g.segment(off, plane) - sum_g[c] / m -
                                           xhat->segment(off, plane) * (sum_gx[c] / m));
                                  } else {
                                      dx->segment(off, plane) += gv[c] * (*inv)[c] * g.segment(off, plane);
                                  }
                              }
                      }
                  });
}

// --- bilinear upsampling -------------------------------------------------------

namespace {

struct AxisMap {
    std::vector<int> i0, i1;
    std::vector<double> frac;
};

AxisMap axis_map(int in, int out) {
    AxisMap m;
    m.i0.resize(out);
    m.i1.resize(out);
    m.frac.resize(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double s = (o + 0.5) * scale - 0.5;
        if (s < 0.0) s = 0.0;
        int i0 = static_cast<int>(s);
        if (i0 > in - 1) i0 = in - 1;
        m.i0[o] = i0;
        m.i1[o] = std::min(i0 + 1, in - 1);
        m.frac[o] = s - i0;
    }
    return m;
}

}  // namespace

Var upsample_bilinear(Tape& t, Var x, int out_h, int out_w) {
    const Shape xs = t.shape(x);
    const Shape os{xs.n, xs.c, out_h, out_w};
    auto ym = std::make_shared<AxisMap>(axis_map(xs.h, out_h));
    auto xm = std::make_shared<AxisMap>(axis_map(xs.w, out_w));

    const Eigen::ArrayXd& in = t.value(x);
    Eigen::ArrayXd out(os.count());
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
            const Eigen::Index ib = plane_offset(xs, n, c);
            const Eigen::Index ob = plane_offset(os, n, c);
            for (int oy = 0; oy < out_h; ++oy) {
                const double fy = ym->frac[oy];
                const Eigen::Index r0 = ib + static_cast<Eigen::Index>(ym->i0[oy]) * xs.w;
                const Eigen::Index r1 = ib + static_cast<Eigen::Index>(ym->i1[oy]) * xs.w;
                for (int ox = 0; ox < out_w; ++ox) {
                    const double fx = xm->frac[ox];
                    const int c0 = xm->i0[ox], c1 = xm->i1[ox];
                    out[ob + static_cast<Eigen::Index>(oy) * out_w + ox] =
                        (1.0 - fy) * ((1.0 - fx) * in[r0 + c0] + fx * in[r0 + c1]) +
                        fy * ((1.0 - fx) * in[r1 + c0] + fx * in[r1 + c1]);
                }
            }
        }

    return t.make(os, std::move(out), {x}, [x, xs, os, ym, xm](Tape& tt, Var self) {
        if (auto* dx = tt.grad_if_needed(x)) {
            const Eigen::ArrayXd& g = tt.grad(self);
            for (int n = 0; n < xs.n; ++n)
                for (int c = 0; c < xs.c; ++c) {
                    const Eigen::Index ib = plane_offset(xs, n, c);
                    const Eigen::Index ob = plane_offset(os, n, c);
                    for (int oy = 0; oy < os.h; ++oy) {
                        const double fy = ym->frac[oy];
                        const Eigen::Index r0 = ib + static_cast<Eigen::Index>(ym->i0[oy]) * xs.w;
                        const Eigen::Index r1 = ib + static_cast<Eigen::Index>(ym->i1[oy]) * xs.w;
                        for (int ox = 0; ox < os.w; ++ox) {
                            const double fx = xm->frac[ox];
                            const int c0 = xm->i0[ox], c1 = xm->i1[ox];
                            const double gv = g[ob + static_cast<Eigen::Index>(oy) * os.w + ox];
                            (*dx)[r0 + c0] += (1.0 - fy) * (1.0 - fx) * gv;
                            (*dx)[r0 + c1] += (1.0 - fy) * fx * gv;
                            (*dx)[r1 + c0] += fy * (1.0 - fx) * gv;
                            (*dx)[r1 + c1] += fy * fx * gv;
                        }
                    }
                }
        }
    });
}

// --- concat / arithmetic -------------------------------------------------------

Var concat_channels(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat of zero tensors");
    const Shape first = t.shape(parts[0]);
    int channels = 0;
    for (Var p : parts) {
        const Shape s = t.shape(p);
        if (s.n != first.n || s.h != first.h || s.w != first.w)
            throw ShapeMismatch("concat parts must agree on batch and spatial dims");
        channels += s.c;
    }
    const Shape os{first.n, channels, first.h, first.w};
    const Eigen::Index plane = static_cast<Eigen::Index>(first.h) * first.w;

    Eigen::ArrayXd out(os.count());
    for (int n = 0; n < os.n; ++n) {
        int co = 0;
        for (Var p : parts) {
            const Shape s = t.shape(p);
            const Eigen::ArrayXd& v = t.value(p);
            out.segment(plane_offset(os, n, co), static_cast<Eigen::Index>(s.c) * plane) =
                v.segment(plane_offset(s, n, 0), static_cast<Eigen::Index>(s.c) * plane);
            co += s.c;
        }
    }

    std::vector<Var> parents = parts;
    return t.make(os, std::move(out), parents, [parents, os, plane](Tape& tt, Var self) {
        const Eigen::ArrayXd& g = tt.grad(self);
        for (int n = 0; n < os.n; ++n) {
            int co = 0;
            for (Var p : parents) {
                const Shape s = tt.shape(p);
                if (auto* dp = tt.grad_if_needed(p))
                    dp->segment(plane_offset(s, n, 0), static_cast<Eigen::Index>(s.c) * plane) +=
                        g.segment(plane_offset(os, n, co), static_cast<Eigen::Index>(s.c) * plane);
                co += s.c;
            }
        }
    });
}

Var add(Tape& t, Var a, Var b) {
    if (!(t.shape(a) == t.shape(b))) throw ShapeMismatch("add shape mismatch");
    Eigen::ArrayXd out = t.value(a) + t.value(b);
    return t.make(t.shape(a), std::move(out), {a, b}, [a, b](Tape& tt, Var self) {
        if (auto* da = tt.grad_if_needed(a)) *da += tt.grad(self);
        if (auto* db = tt.grad_if_needed(b)) *db += tt.grad(self);
    });
}

Var scale(Tape& t, Var a, double s) {
    Eigen::ArrayXd out = t.value(a) * s;
    return t.make(t.shape(a), std::move(out), {a}, [a, s](Tape& tt, Var self) {
        if (auto* da = tt.grad_if_needed(a)) *da += s * tt.grad(self);
    });
}

Var weighted_sum(Tape& t, Var v, Eigen::ArrayXd weights) {
    if (weights.size() != t.value(v).size()) throw ShapeMismatch("weighted_sum weight length mismatch");
    auto wts = std::make_shared<Eigen::ArrayXd>(std::move(weights));
    Eigen::ArrayXd out(1);
    out[0] = (t.value(v) * *wts).sum();
    return t.make(Shape{1, 1, 1, 1}, std::move(out), {v}, [v, wts](Tape& tt, Var self) {
        if (auto* dv = tt.grad_if_needed(v)) *dv += tt.grad(self)[0] * *wts;
    });
}

Var bce_with_logits_mean(Tape& t, Var logits, const Eigen::ArrayXd& targets) {
    const Eigen::ArrayXd& f = t.value(logits);
    if (targets.size() != f.size()) throw ShapeMismatch("bce target length mismatch");

    const double n = static_cast<double>(f.size());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double v = f[i];
        sum += std::max(v, 0.0) - v * targets[i] + std::log1p(std::exp(-std::abs(v)));
    }
    auto y = std::make_shared<Eigen::ArrayXd>(targets);
    Eigen::ArrayXd out(1);
    out[0] = sum / n;
    return t.make(Shape{1, 1, 1, 1}, std::move(out), {logits}, [logits, y, n](Tape& tt, Var self) {
        if (auto* df = tt.grad_if_needed(logits))
            *df += (sigmoid_array(tt.value(logits)) - *y) * (tt.grad(self)[0] / n);
    });
}

}  // namespace crackdet::ad
