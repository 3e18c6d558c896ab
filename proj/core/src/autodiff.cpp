#include "ramseg/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <utility>

namespace ramseg {

namespace {

// C[M x N] += A[M x K] * B[K x N]. Four output rows share each streamed B
// row, which keeps the kernel compute-bound for the small M this code sees.
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    int i = 0;
    for (; i + 4 <= m; i += 4) {
        double* c0 = c + static_cast<size_t>(i) * n;
        double* c1 = c0 + n;
        double* c2 = c1 + n;
        double* c3 = c2 + n;
        const double* a0 = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double v0 = a0[p], v1 = a0[k + p], v2 = a0[2 * k + p], v3 = a0[3 * k + p];
            const double* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) {
                const double bv = brow[j];
                c0[j] += v0 * bv;
                c1[j] += v1 * bv;
                c2[j] += v2 * bv;
                c3[j] += v3 * bv;
            }
        }
    }
    for (; i < m; ++i) {
        double* crow = c + static_cast<size_t>(i) * n;
        const double* arow = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[M x K] += A[M x N] * B[K x N]^T
void gemm_abt_acc(const double* a, const double* b, double* c, int m, int n, int k) {
    int i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* a0 = a + static_cast<size_t>(i) * n;
        const double* a1 = a0 + n;
        const double* a2 = a1 + n;
        const double* a3 = a2 + n;
        double* c0 = c + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* brow = b + static_cast<size_t>(p) * n;
            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double bv = brow[j];
                s0 += a0[j] * bv;
                s1 += a1[j] * bv;
                s2 += a2[j] * bv;
                s3 += a3[j] * bv;
            }
            c0[p] += s0;
            c0[k + p] += s1;
            c0[2 * k + p] += s2;
            c0[3 * k + p] += s3;
        }
    }
    for (; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * n;
        double* crow = c + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* brow = b + static_cast<size_t>(p) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += arow[j] * brow[j];
            crow[p] += acc;
        }
    }
}

// C[K x N] += A[M x K]^T * B[M x N]. Four A rows share each streamed C row.
void gemm_atb_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    int i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* a0 = a + static_cast<size_t>(i) * k;
        const double* b0 = b + static_cast<size_t>(i) * n;
        const double* b1 = b0 + n;
        const double* b2 = b1 + n;
        const double* b3 = b2 + n;
        for (int p = 0; p < k; ++p) {
            const double v0 = a0[p], v1 = a0[k + p], v2 = a0[2 * k + p], v3 = a0[3 * k + p];
            double* crow = c + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j)
                crow[j] += v0 * b0[j] + v1 * b1[j] + v2 * b2[j] + v3 * b3[j];
        }
    }
    for (; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        const double* brow = b + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = c + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void im2col(const double* x, int cin, int h, int w, int k, int stride, int pad, int hout, int wout,
            double* col) {
    const long npix = static_cast<long>(hout) * wout;
    for (int ci = 0; ci < cin; ++ci) {
        const double* plane = x + static_cast<size_t>(ci) * h * w;
        for (int kr = 0; kr < k; ++kr) {
            for (int kc = 0; kc < k; ++kc) {
                double* row = col + (static_cast<size_t>(ci) * k * k + static_cast<size_t>(kr) * k + kc) * npix;
                for (int oh = 0; oh < hout; ++oh) {
                    const int ih = oh * stride - pad + kr;
                    double* out = row + static_cast<size_t>(oh) * wout;
                    if (ih < 0 || ih >= h) {
                        std::fill(out, out + wout, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<size_t>(ih) * w;
                    for (int ow = 0; ow < wout; ++ow) {
                        const int iw = ow * stride - pad + kc;
                        out[ow] = (iw >= 0 && iw < w) ? src[iw] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_acc(const double* col, int cin, int h, int w, int k, int stride, int pad, int hout,
                int wout, double* dx) {
    const long npix = static_cast<long>(hout) * wout;
    for (int ci = 0; ci < cin; ++ci) {
        double* plane = dx + static_cast<size_t>(ci) * h * w;
        for (int kr = 0; kr < k; ++kr) {
            for (int kc = 0; kc < k; ++kc) {
                const double* row =
                    col + (static_cast<size_t>(ci) * k * k + static_cast<size_t>(kr) * k + kc) * npix;
                for (int oh = 0; oh < hout; ++oh) {
                    const int ih = oh * stride - pad + kr;
                    if (ih < 0 || ih >= h) continue;
                    const double* src = row + static_cast<size_t>(oh) * wout;
                    double* dst = plane + static_cast<size_t>(ih) * w;
                    for (int ow = 0; ow < wout; ++ow) {
                        const int iw = ow * stride - pad + kc;
                        if (iw >= 0 && iw < w) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

std::vector<double>& scratch_buffer() {
    thread_local std::vector<double> buf;
    return buf;
}

}  // namespace

Tape::Tape() {
    static std::atomic<uint64_t> next{1};
    uid_ = next.fetch_add(1, std::memory_order_relaxed);
}

BatchNormState BatchNormState::init(int channels) {
    BatchNormState s;
    s.gamma = Tensor::full({channels}, 1.0);
    s.beta = Tensor({channels});
    s.running_mean = Tensor({channels});
    s.running_var = Tensor::full({channels}, 1.0);
    return s;
}

NodeId Tape::push(Tensor value, std::function<void(Tape&, NodeId)> backprop) {
    debug_check_finite(value, "tape op");
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(backprop)});
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor value) {
    return push(std::move(value), nullptr);
}

Tensor& Tape::grad_buffer(NodeId id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

Tensor Tape::grad_or_zero(NodeId id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
}

void Tape::backward(NodeId loss) {
    if (loss < 0 || static_cast<size_t>(loss) >= nodes_.size()) fail_invalid("backward: bad node id");
    if (nodes_[static_cast<size_t>(loss)].value.numel() != 1)
        fail_invalid("backward requires a scalar loss node");
    if (backward_done_) fail_invalid("backward may be called once per tape");
    backward_done_ = true;

    grad_buffer(loss)[0] = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.grad.empty() && n.backprop) n.backprop(*this, id);
    }
}

NodeId Tape::conv2d(NodeId x, NodeId w, NodeId b, int stride, int padding) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (xv.rank() != 4 || wv.rank() != 4) fail_invalid("conv2d expects 4-D input and kernel");
    const int n = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), ww = xv.dim(3);
    const int cout = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != cin) fail_invalid("conv2d: kernel input channels do not match input");
    if (wv.dim(3) != k) fail_invalid("conv2d: kernels must be square");
    if (k % 2 == 0) fail_invalid("conv2d: kernel size must be odd");
    if (bv.rank() != 1 || bv.dim(0) != cout) fail_invalid("conv2d: bias must be {Cout}");
    if (stride < 1 || padding < 0) fail_invalid("conv2d: bad stride/padding");
    const int hout = (h + 2 * padding - k) / stride + 1;
    const int wout = (ww + 2 * padding - k) / stride + 1;
    if (hout < 1 || wout < 1 || h + 2 * padding < k || ww + 2 * padding < k)
        fail_invalid("conv2d: spatial dims incompatible with kernel/stride/padding");

    const long npix = static_cast<long>(hout) * wout;
    const int ck2 = cin * k * k;
    Tensor out({n, cout, hout, wout});
    std::vector<double>& col = scratch_buffer();
    col.resize(static_cast<size_t>(ck2) * npix);
    for (int i = 0; i < n; ++i) {
        im2col(xv.data() + static_cast<size_t>(i) * cin * h * ww, cin, h, ww, k, stride, padding, hout,
               wout, col.data());
        double* dst = out.data() + static_cast<size_t>(i) * cout * npix;
        for (int co = 0; co < cout; ++co)
            std::fill(dst + static_cast<size_t>(co) * npix, dst + static_cast<size_t>(co + 1) * npix,
                      bv[co]);
        gemm_acc(wv.data(), col.data(), dst, cout, ck2, static_cast<int>(npix));
    }

    return push(std::move(out), [x, w, b, stride, padding](Tape& t, NodeId self) {
        const Tensor& xv = t.value(x);
        const Tensor& wv = t.value(w);
        const Tensor& g = t.grad(self);
        const int n = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), ww = xv.dim(3);
        const int cout = wv.dim(0), k = wv.dim(2);
        const int hout = g.dim(2), wout = g.dim(3);
        const long npix = static_cast<long>(hout) * wout;
        const int ck2 = cin * k * k;

        Tensor& dx = t.grad_buffer(x);
        Tensor& dw = t.grad_buffer(w);
        Tensor& db = t.grad_buffer(b);
        std::vector<double> col(static_cast<size_t>(ck2) * npix);
        std::vector<double> dcol(static_cast<size_t>(ck2) * npix);
        for (int i = 0; i < n; ++i) {
            const double* gi = g.data() + static_cast<size_t>(i) * cout * npix;
            for (int co = 0; co < cout; ++co) {
                double acc = 0.0;
                const double* row = gi + static_cast<size_t>(co) * npix;
                for (long j = 0; j < npix; ++j) acc += row[j];
                db[co] += acc;
            }
            im2col(xv.data() + static_cast<size_t>(i) * cin * h * ww, cin, h, ww, k, stride, padding,
                   hout, wout, col.data());
            gemm_abt_acc(gi, col.data(), dw.data(), cout, static_cast<int>(npix), ck2);
            std::fill(dcol.begin(), dcol.end(), 0.0);
            gemm_atb_acc(wv.data(), gi, dcol.data(), cout, ck2, static_cast<int>(npix));
            col2im_acc(dcol.data(), cin, h, ww, k, stride, padding, hout, wout,
                       dx.data() + static_cast<size_t>(i) * cin * h * ww);
        }
    });
}

NodeId Tape::batchnorm(NodeId x, NodeId gamma, NodeId beta, BatchNormState& state, BnMode mode,
                       bool update_running) {
    const Tensor& xv = value(x);
    if (xv.rank() != 4) fail_invalid("batchnorm expects {N,C,H,W}");
    const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    const Tensor& gv = value(gamma);
    const Tensor& bv = value(beta);
    if (gv.rank() != 1 || gv.dim(0) != c || bv.rank() != 1 || bv.dim(0) != c)
        fail_invalid("batchnorm: gamma/beta must be {C}");
    const long m = static_cast<long>(n) * h * w;
    const long plane = static_cast<long>(h) * w;

    auto xhat = std::make_shared<Tensor>(xv.shape());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(c));

    if (mode == BnMode::train) {
        if (m < 2) fail_invalid("batchnorm: train mode needs at least 2 elements per channel");
        std::vector<double> mean(static_cast<size_t>(c), 0.0), var(static_cast<size_t>(c), 0.0);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const double* src = xv.data() + (static_cast<size_t>(i) * c + ch) * plane;
                double acc = 0.0;
                for (long j = 0; j < plane; ++j) acc += src[j];
                mean[static_cast<size_t>(ch)] += acc;
            }
        for (int ch = 0; ch < c; ++ch) mean[static_cast<size_t>(ch)] /= static_cast<double>(m);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const double* src = xv.data() + (static_cast<size_t>(i) * c + ch) * plane;
                const double mu = mean[static_cast<size_t>(ch)];
                double acc = 0.0;
                for (long j = 0; j < plane; ++j) {
                    const double d = src[j] - mu;
                    acc += d * d;
                }
                var[static_cast<size_t>(ch)] += acc;
            }
        for (int ch = 0; ch < c; ++ch) var[static_cast<size_t>(ch)] /= static_cast<double>(m);
        for (int ch = 0; ch < c; ++ch)
            (*inv_std)[static_cast<size_t>(ch)] = 1.0 / std::sqrt(var[static_cast<size_t>(ch)] + state.eps);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const double* src = xv.data() + (static_cast<size_t>(i) * c + ch) * plane;
                double* dst = xhat->data() + (static_cast<size_t>(i) * c + ch) * plane;
                const double mu = mean[static_cast<size_t>(ch)];
                const double is = (*inv_std)[static_cast<size_t>(ch)];
                for (long j = 0; j < plane; ++j) dst[j] = (src[j] - mu) * is;
            }
        if (update_running) {
            const double mom = state.momentum;
            const double unbias = static_cast<double>(m) / static_cast<double>(m - 1);
            for (int ch = 0; ch < c; ++ch) {
                state.running_mean[ch] = (1.0 - mom) * state.running_mean[ch] + mom * mean[static_cast<size_t>(ch)];
                state.running_var[ch] =
                    (1.0 - mom) * state.running_var[ch] + mom * var[static_cast<size_t>(ch)] * unbias;
            }
        }
    } else {
        for (int ch = 0; ch < c; ++ch)
            (*inv_std)[static_cast<size_t>(ch)] = 1.0 / std::sqrt(state.running_var[ch] + state.eps);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const double* src = xv.data() + (static_cast<size_t>(i) * c + ch) * plane;
                double* dst = xhat->data() + (static_cast<size_t>(i) * c + ch) * plane;
                const double mu = state.running_mean[ch];
                const double is = (*inv_std)[static_cast<size_t>(ch)];
                for (long j = 0; j < plane; ++j) dst[j] = (src[j] - mu) * is;
            }
    }

    Tensor out(xv.shape());
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double* src = xhat->data() + (static_cast<size_t>(i) * c + ch) * plane;
            double* dst = out.data() + (static_cast<size_t>(i) * c + ch) * plane;
            const double ga = gv[ch], be = bv[ch];
            for (long j = 0; j < plane; ++j) dst[j] = ga * src[j] + be;
        }

    const bool train = (mode == BnMode::train);
    return push(std::move(out), [x, gamma, beta, xhat, inv_std, train](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& gv = t.value(gamma);
        const int n = g.dim(0), c = g.dim(1), h = g.dim(2), w = g.dim(3);
        const long plane = static_cast<long>(h) * w;
        const double m = static_cast<double>(static_cast<long>(n) * h * w);

        Tensor& dx = t.grad_buffer(x);
        Tensor& dgamma = t.grad_buffer(gamma);
        Tensor& dbeta = t.grad_buffer(beta);

        std::vector<double> sum_g(static_cast<size_t>(c), 0.0), sum_gx(static_cast<size_t>(c), 0.0);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const double* gr = g.data() + (static_cast<size_t>(i) * c + ch) * plane;
                const double* xh = xhat->data() + (static_cast<size_t>(i) * c + ch) * plane;
                double a = 0.0, b2 = 0.0;
                for (long j = 0; j < plane; ++j) {
                    a += gr[j];
                    b2 += gr[j] * xh[j];
                }
                sum_g[static_cast<size_t>(ch)] += a;
                sum_gx[static_cast<size_t>(ch)] += b2;
            }
        for (int ch = 0; ch < c; ++ch) {
            dbeta[ch] += sum_g[static_cast<size_t>(ch)];
            dgamma[ch] += sum_gx[static_cast<size_t>(ch)];
        }
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const double* gr = g.data() + (static_cast<size_t>(i) * c + ch) * plane;
                const double* xh = xhat->data() + (static_cast<size_t>(i) * c + ch) * plane;
                double* dst = dx.data() + (static_cast<size_t>(i) * c + ch) * plane;
                const double scale = gv[ch] * (*inv_std)[static_cast<size_t>(ch)];
                if (train) {
                    const double mg = sum_g[static_cast<size_t>(ch)] / m;
                    const double mgx = sum_gx[static_cast<size_t>(ch)] / m;
                    for (long j = 0; j < plane; ++j) dst[j] += scale * (gr[j] - mg - xh[j] * mgx);
                } else {
                    for (long j = 0; j < plane; ++j) dst[j] += scale * gr[j];
                }
            }
    });
}

NodeId Tape::relu(NodeId x) {
    const Tensor& xv = value(x);
    Tensor out(xv.shape());
    for (long i = 0; i < xv.numel(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    return push(std::move(out), [x](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(x);
        Tensor& dx = t.grad_buffer(x);
        for (long i = 0; i < g.numel(); ++i)
            if (xv[i] > 0.0) dx[i] += g[i];   // subgradient at 0 is 0
    });
}

NodeId Tape::sigmoid(NodeId x) {
    const Tensor& xv = value(x);
    Tensor out(xv.shape());
    for (long i = 0; i < xv.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
    return push(std::move(out), [x](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& s = t.value(self);
        Tensor& dx = t.grad_buffer(x);
        for (long i = 0; i < g.numel(); ++i) dx[i] += g[i] * s[i] * (1.0 - s[i]);
    });
}

NodeId Tape::tanh(NodeId x) {
    const Tensor& xv = value(x);
    Tensor out(xv.shape());
    for (long i = 0; i < xv.numel(); ++i) out[i] = std::tanh(xv[i]);
    return push(std::move(out), [x](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& s = t.value(self);
        Tensor& dx = t.grad_buffer(x);
        for (long i = 0; i < g.numel(); ++i) dx[i] += g[i] * (1.0 - s[i] * s[i]);
    });
}

NodeId Tape::log(NodeId x) {
    const Tensor& xv = value(x);
    Tensor out(xv.shape());
    for (long i = 0; i < xv.numel(); ++i) out[i] = std::log(xv[i]);
    return push(std::move(out), [x](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(x);
        Tensor& dx = t.grad_buffer(x);
        for (long i = 0; i < g.numel(); ++i) dx[i] += g[i] / xv[i];
    });
}

NodeId Tape::clamp(NodeId x, double lo, double hi) {
    if (!(lo < hi)) fail_invalid("clamp: lo must be < hi");
    const Tensor& xv = value(x);
    Tensor out(xv.shape());
    for (long i = 0; i < xv.numel(); ++i) out[i] = std::clamp(xv[i], lo, hi);
    return push(std::move(out), [x, lo, hi](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(x);
        Tensor& dx = t.grad_buffer(x);
        for (long i = 0; i < g.numel(); ++i)
            if (xv[i] > lo && xv[i] < hi) dx[i] += g[i];
    });
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) fail_invalid("add: shape mismatch");
    Tensor out(av.shape());
    for (long i = 0; i < av.numel(); ++i) out[i] = av[i] + bv[i];
    return push(std::move(out), [a, b](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        Tensor& da = t.grad_buffer(a);
        for (long i = 0; i < g.numel(); ++i) da[i] += g[i];
        Tensor& db = t.grad_buffer(b);
        for (long i = 0; i < g.numel(); ++i) db[i] += g[i];
    });
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) fail_invalid("sub: shape mismatch");
    Tensor out(av.shape());
    for (long i = 0; i < av.numel(); ++i) out[i] = av[i] - bv[i];
    return push(std::move(out), [a, b](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        Tensor& da = t.grad_buffer(a);
        for (long i = 0; i < g.numel(); ++i) da[i] += g[i];
        Tensor& db = t.grad_buffer(b);
        for (long i = 0; i < g.numel(); ++i) db[i] -= g[i];
    });
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) fail_invalid("mul: shape mismatch");
    Tensor out(av.shape());
    for (long i = 0; i < av.numel(); ++i) out[i] = av[i] * bv[i];
    return push(std::move(out), [a, b](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& av = t.value(a);
        const Tensor& bv = t.value(b);
        Tensor& da = t.grad_buffer(a);
        for (long i = 0; i < g.numel(); ++i) da[i] += g[i] * bv[i];
        Tensor& db = t.grad_buffer(b);
        for (long i = 0; i < g.numel(); ++i) db[i] += g[i] * av[i];
    });
}

NodeId Tape::div(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) fail_invalid("div: shape mismatch");
    Tensor out(av.shape());
    for (long i = 0; i < av.numel(); ++i) out[i] = av[i] / bv[i];
    return push(std::move(out), [a, b](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& bv = t.value(b);
        const Tensor& ov = t.value(self);
        Tensor& da = t.grad_buffer(a);
        for (long i = 0; i < g.numel(); ++i) da[i] += g[i] / bv[i];
        Tensor& db = t.grad_buffer(b);
        for (long i = 0; i < g.numel(); ++i) db[i] -= g[i] * ov[i] / bv[i];
    });
}

NodeId Tape::scalar_affine(NodeId x, double mul, double add) {
    const Tensor& xv = value(x);
    Tensor out(xv.shape());
    for (long i = 0; i < xv.numel(); ++i) out[i] = mul * xv[i] + add;
    return push(std::move(out), [x, mul](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        Tensor& dx = t.grad_buffer(x);
        for (long i = 0; i < g.numel(); ++i) dx[i] += mul * g[i];
    });
}

NodeId Tape::upsample2x_nearest(NodeId x) {
    const Tensor& xv = value(x);
    if (xv.rank() != 4) fail_invalid("upsample2x_nearest expects {N,C,H,W}");
    const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    Tensor out({n, c, 2 * h, 2 * w});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int r = 0; r < 2 * h; ++r) {
                const double* src =
                    xv.data() + ((static_cast<size_t>(i) * c + ch) * h + r / 2) * static_cast<size_t>(w);
                double* dst = out.data() +
                              ((static_cast<size_t>(i) * c + ch) * 2 * h + r) * static_cast<size_t>(2 * w);
                for (int cc = 0; cc < w; ++cc) {
                    dst[2 * cc] = src[cc];
                    dst[2 * cc + 1] = src[cc];
                }
            }
    return push(std::move(out), [x](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        Tensor& dx = t.grad_buffer(x);
        const int n = dx.dim(0), c = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch)
                for (int r = 0; r < 2 * h; ++r) {
                    const double* src =
                        g.data() + ((static_cast<size_t>(i) * c + ch) * 2 * h + r) * static_cast<size_t>(2 * w);
                    double* dst =
                        dx.data() + ((static_cast<size_t>(i) * c + ch) * h + r / 2) * static_cast<size_t>(w);
                    for (int cc = 0; cc < w; ++cc) dst[cc] += src[2 * cc] + src[2 * cc + 1];
                }
    });
}

NodeId Tape::concat_channels(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.rank() != 4 || bv.rank() != 4) fail_invalid("concat_channels expects {N,C,H,W}");
    if (av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3))
        fail_invalid("concat_channels: non-channel dims must match");
    const int n = av.dim(0), c1 = av.dim(1), c2 = bv.dim(1), h = av.dim(2), w = av.dim(3);
    const long plane = static_cast<long>(h) * w;
    Tensor out({n, c1 + c2, h, w});
    for (int i = 0; i < n; ++i) {
        std::copy(av.data() + static_cast<size_t>(i) * c1 * plane,
                  av.data() + static_cast<size_t>(i + 1) * c1 * plane,
                  out.data() + static_cast<size_t>(i) * (c1 + c2) * plane);
        std::copy(bv.data() + static_cast<size_t>(i) * c2 * plane,
                  bv.data() + static_cast<size_t>(i + 1) * c2 * plane,
                  out.data() + (static_cast<size_t>(i) * (c1 + c2) + c1) * plane);
    }
    return push(std::move(out), [a, b, c1, c2, plane](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const int n = g.dim(0);
        Tensor& da = t.grad_buffer(a);
        Tensor& db = t.grad_buffer(b);
        for (int i = 0; i < n; ++i) {
            const double* ga = g.data() + static_cast<size_t>(i) * (c1 + c2) * plane;
            double* d1 = da.data() + static_cast<size_t>(i) * c1 * plane;
            for (long j = 0; j < c1 * plane; ++j) d1[j] += ga[j];
            const double* gb = ga + static_cast<size_t>(c1) * plane;
            double* d2 = db.data() + static_cast<size_t>(i) * c2 * plane;
            for (long j = 0; j < c2 * plane; ++j) d2[j] += gb[j];
        }
    });
}

NodeId Tape::slice_batch(NodeId x, int n0, int n1) {
    const Tensor& xv = value(x);
    if (xv.rank() != 4) fail_invalid("slice_batch expects {N,C,H,W}");
    if (!(0 <= n0 && n0 < n1 && n1 <= xv.dim(0))) fail_invalid("slice_batch: bad range");
    const long row = static_cast<long>(xv.dim(1)) * xv.dim(2) * xv.dim(3);
    Tensor out({n1 - n0, xv.dim(1), xv.dim(2), xv.dim(3)});
    std::copy(xv.data() + static_cast<size_t>(n0) * row, xv.data() + static_cast<size_t>(n1) * row,
              out.data());
    return push(std::move(out), [x, n0, row](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        Tensor& dx = t.grad_buffer(x);
        double* dst = dx.data() + static_cast<size_t>(n0) * row;
        for (long i = 0; i < g.numel(); ++i) dst[i] += g[i];
    });
}

NodeId Tape::sum_all(NodeId x) {
    const Tensor& xv = value(x);
    return push(Tensor::scalar(xv.sum()), [x](Tape& t, NodeId self) {
        const double g = t.grad(self)[0];
        Tensor& dx = t.grad_buffer(x);
        for (long i = 0; i < dx.numel(); ++i) dx[i] += g;
    });
}

NodeId Tape::mean_all(NodeId x) {
    const Tensor& xv = value(x);
    const double inv = 1.0 / static_cast<double>(xv.numel());
    return push(Tensor::scalar(xv.sum() * inv), [x, inv](Tape& t, NodeId self) {
        const double g = t.grad(self)[0] * inv;
        Tensor& dx = t.grad_buffer(x);
        for (long i = 0; i < dx.numel(); ++i) dx[i] += g;
    });
}

NodeId Tape::sum_per_channel(NodeId x) {
    const Tensor& xv = value(x);
    if (xv.rank() != 4) fail_invalid("sum_per_channel expects {N,C,H,W}");
    const int n = xv.dim(0), c = xv.dim(1);
    const long plane = static_cast<long>(xv.dim(2)) * xv.dim(3);
    Tensor out({c});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double* src = xv.data() + (static_cast<size_t>(i) * c + ch) * plane;
            double acc = 0.0;
            for (long j = 0; j < plane; ++j) acc += src[j];
            out[ch] += acc;
        }
    return push(std::move(out), [x, c, plane](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        Tensor& dx = t.grad_buffer(x);
        const int n = dx.dim(0);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                double* dst = dx.data() + (static_cast<size_t>(i) * c + ch) * plane;
                const double gc = g[ch];
                for (long j = 0; j < plane; ++j) dst[j] += gc;
            }
    });
}

FiniteDiffReport finite_diff_check(const TapeFunction& f, const std::vector<Tensor>& theta, double h,
                                   double tol) {
    Tape tape;
    std::vector<NodeId> ids;
    ids.reserve(theta.size());
    for (const Tensor& t : theta) ids.push_back(tape.leaf(t));
    const NodeId loss = f(tape, ids);
    if (tape.value(loss).numel() != 1) fail_invalid("finite_diff_check: f must produce a scalar");
    tape.backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(theta.size());
    for (NodeId id : ids) analytic.push_back(tape.grad_or_zero(id));

    auto eval = [&f](const std::vector<Tensor>& th) {
        Tape t;
        std::vector<NodeId> ii;
        ii.reserve(th.size());
        for (const Tensor& x : th) ii.push_back(t.leaf(x));
        return t.value(f(t, ii))[0];
    };

    FiniteDiffReport rep;
    std::vector<Tensor> work = theta;
    for (size_t p = 0; p < work.size(); ++p) {
        for (long i = 0; i < work[p].numel(); ++i) {
            const double orig = work[p][i];
            work[p][i] = orig + h;
            const double fp = eval(work);
            work[p][i] = orig - h;
            const double fm = eval(work);
            work[p][i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[p][i];
            const double rel =
                std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-4});
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_param = static_cast<int>(p);
                rep.worst_index = i;
                rep.analytic = a;
                rep.numeric = numeric;
            }
        }
    }
    rep.pass = rep.max_rel_error < tol;
    return rep;
}

}  // namespace ramseg
