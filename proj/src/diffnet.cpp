#include "qp/diffnet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "qp/kernels.hpp"
#include "qp/parallel.hpp"
#include "qp/philox.hpp"

namespace qp {

std::vector<std::size_t> Architecture::widths() const {
  std::vector<std::size_t> w;
  w.reserve(hidden.size() + 2);
  w.push_back(input_dim);
  for (std::size_t h : hidden) w.push_back(h);
  w.push_back(output_dim);
  return w;
}

std::size_t NetworkParams::param_count(const Architecture& arch) {
  auto w = arch.widths();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) n += w[l + 1] * w[l] + w[l + 1];
  return n;
}

std::size_t NetworkParams::weight_offset(std::size_t layer) const {
  auto w = arch.widths();
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += w[l + 1] * w[l] + w[l + 1];
  return off;
}

std::size_t NetworkParams::bias_offset(std::size_t layer) const {
  auto w = arch.widths();
  return weight_offset(layer) + w[layer + 1] * w[layer];
}

NetworkParams init_network(const Architecture& arch, std::uint64_t seed) {
  if (arch.input_dim == 0 || arch.output_dim == 0)
    throw std::invalid_argument("init_network: zero-width layer");
  for (std::size_t h : arch.hidden)
    if (h == 0) throw std::invalid_argument("init_network: zero-width layer");
  NetworkParams p;
  p.arch = arch;
  p.seed = seed;
  p.theta.assign(NetworkParams::param_count(arch), 0.0);
  auto w = arch.widths();
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    PhiloxStream rng(seed, l);
    double scale = 1.0 / std::sqrt(double(w[l]));
    std::size_t off = p.weight_offset(l);
    for (std::size_t i = 0; i < w[l + 1] * w[l]; ++i)
      p.theta[off + i] = scale * (2.0 * rng.uniform() - 1.0);
    // biases stay zero
  }
  return p;
}

namespace {

// Scratch for one augmented forward/backward pass; reused across samples.
struct Workspace {
  std::vector<std::size_t> w; // widths, L+1 entries
  std::size_t n = 0;          // input dim
  // forward state
  std::vector<Vec> act; // act[l]: activation entering layer l, act[L] = output
  std::vector<Vec> jt;  // jt[l]: n rows of length w[l] (Jacobian transposed)
  std::vector<Vec> st;  // st[l]: n rows of length w[l+1], rows of W_l * J_in
  // backward state
  Vec abar, abar_next, zbar;
  std::vector<Vec> jbar, jbar_next;

  void resize(const Architecture& arch) {
    w = arch.widths();
    n = arch.input_dim;
    std::size_t L = w.size() - 1;
    act.resize(L + 1);
    jt.resize(L + 1);
    st.resize(L);
    std::size_t wmax = 0;
    for (std::size_t l = 0; l <= L; ++l) {
      act[l].assign(w[l], 0.0);
      jt[l].assign(n * w[l], 0.0);
      if (l < L) st[l].assign(n * w[l + 1], 0.0);
      wmax = std::max(wmax, w[l]);
    }
    abar.assign(wmax, 0.0);
    abar_next.assign(wmax, 0.0);
    zbar.assign(wmax, 0.0);
    jbar.resize(n);
    jbar_next.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      jbar[j].assign(wmax, 0.0);
      jbar_next[j].assign(wmax, 0.0);
    }
  }
};

void forward_pass(const NetworkParams& p, const Vec& x, Workspace& ws,
                  bool with_jacobian) {
  const auto& w = ws.w;
  std::size_t L = w.size() - 1, n = ws.n;
  ws.act[0] = x;
  if (with_jacobian) {
    std::fill(ws.jt[0].begin(), ws.jt[0].end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) ws.jt[0][j * w[0] + j] = 1.0;
  }
  for (std::size_t l = 0; l < L; ++l) {
    const double* W = p.theta.data() + p.weight_offset(l);
    const double* b = p.theta.data() + p.bias_offset(l);
    Vec& out = ws.act[l + 1];
    kernels::matvec(W, w[l + 1], w[l], ws.act[l].data(), out.data());
    for (std::size_t i = 0; i < w[l + 1]; ++i) out[i] += b[i];
    if (with_jacobian)
      for (std::size_t j = 0; j < n; ++j)
        kernels::matvec(W, w[l + 1], w[l], ws.jt[l].data() + j * w[l],
                        ws.st[l].data() + j * w[l + 1]);
    bool hidden = l + 1 < L;
    if (hidden) kernels::tanh_vec(out.data(), out.data(), w[l + 1]);
    for (double v : out)
      if (!std::isfinite(v))
        throw std::runtime_error("diffnet: non-finite value in layer " +
                                 std::to_string(l));
    if (with_jacobian) {
      for (std::size_t j = 0; j < n; ++j) {
        double* jrow = ws.jt[l + 1].data() + j * w[l + 1];
        const double* srow = ws.st[l].data() + j * w[l + 1];
        if (hidden) {
          for (std::size_t k = 0; k < w[l + 1]; ++k)
            jrow[k] = (1.0 - out[k] * out[k]) * srow[k];
        } else {
          std::memcpy(jrow, srow, w[l + 1] * sizeof(double));
        }
      }
    }
  }
}

// Reverse pass through the augmented (value, Jacobian) computation. dout and
// djt are the cotangents of act[L] and jt[L]; gradient is accumulated into
// grad (same layout as theta).
void backward_pass(const NetworkParams& p, Workspace& ws, const Vec& dout,
                   const std::vector<Vec>& djt, double* grad) {
  const auto& w = ws.w;
  std::size_t L = w.size() - 1, n = ws.n;
  std::copy(dout.begin(), dout.end(), ws.abar.begin());
  for (std::size_t j = 0; j < n; ++j)
    std::copy(djt[j].begin(), djt[j].end(), ws.jbar[j].begin());

  for (std::size_t l = L; l-- > 0;) {
    const double* W = p.theta.data() + p.weight_offset(l);
    double* gW = grad + p.weight_offset(l);
    double* gb = grad + p.bias_offset(l);
    std::size_t rows = w[l + 1], cols = w[l];
    bool hidden = l + 1 < L;
    const Vec& t = ws.act[l + 1];

    // zbar and sbar (sbar overwrites jbar rows in place for hidden layers).
    if (hidden) {
      for (std::size_t k = 0; k < rows; ++k) {
        double dbar = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          dbar += ws.jbar[j][k] * ws.st[l][j * rows + k];
        double tbar = ws.abar[k] - 2.0 * t[k] * dbar;
        ws.zbar[k] = (1.0 - t[k] * t[k]) * tbar;
        for (std::size_t j = 0; j < n; ++j)
          ws.jbar[j][k] *= (1.0 - t[k] * t[k]);
      }
    } else {
      std::copy(ws.abar.begin(), ws.abar.begin() + rows, ws.zbar.begin());
    }

    kernels::ger(ws.zbar.data(), rows, ws.act[l].data(), cols, gW);
    for (std::size_t j = 0; j < n; ++j)
      kernels::ger(ws.jbar[j].data(), rows, ws.jt[l].data() + j * cols, cols, gW);
    for (std::size_t i = 0; i < rows; ++i) gb[i] += ws.zbar[i];

    if (l > 0) {
      kernels::matvec_t(W, rows, cols, ws.zbar.data(), ws.abar_next.data());
      std::swap(ws.abar, ws.abar_next);
      for (std::size_t j = 0; j < n; ++j) {
        kernels::matvec_t(W, rows, cols, ws.jbar[j].data(),
                          ws.jbar_next[j].data());
        std::swap(ws.jbar[j], ws.jbar_next[j]);
      }
    }
  }
}

EvalWithJacobian extract_eval(const Workspace& ws) {
  std::size_t L = ws.w.size() - 1, n = ws.n, out_dim = ws.w[L];
  EvalWithJacobian ev;
  ev.outputs = ws.act[L];
  ev.jacobian = Mat(out_dim, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < out_dim; ++k)
      ev.jacobian(k, j) = ws.jt[L][j * out_dim + k];
  return ev;
}

} // namespace

Vec forward(const NetworkParams& params, const Vec& x) {
  if (x.size() != params.arch.input_dim)
    throw std::invalid_argument("forward: dimension mismatch");
  thread_local Workspace ws;
  thread_local Architecture cached;
  if (!(cached == params.arch)) {
    ws.resize(params.arch);
    cached = params.arch;
  }
  forward_pass(params, x, ws, false);
  return ws.act.back();
}

EvalWithJacobian forward_with_input_jacobian(const NetworkParams& params,
                                             const Vec& x) {
  if (x.size() != params.arch.input_dim)
    throw std::invalid_argument("forward: dimension mismatch");
  thread_local Workspace ws;
  thread_local Architecture cached;
  if (!(cached == params.arch)) {
    ws.resize(params.arch);
    cached = params.arch;
  }
  forward_pass(params, x, ws, true);
  return extract_eval(ws);
}

BatchGradient parameter_gradient(const NetworkParams& params,
                                 const std::vector<Vec>& batch,
                                 const SampleAdjointFn& adjoint,
                                 std::size_t workers) {
  std::size_t np = params.theta.size();
  std::size_t n = params.arch.input_dim;
  std::size_t out_dim = params.arch.output_dim;

  BatchGradient result;
  result.grad.assign(np, 0.0);

  // Fixed chunks keep the per-sample gradient slots bounded while the
  // index-ordered reduction stays identical for every worker count.
  constexpr std::size_t kChunk = 256;
  std::size_t chunk = std::min(kChunk, std::max<std::size_t>(batch.size(), 1));
  std::vector<Vec> slot(chunk, Vec(np, 0.0));
  std::vector<double> slot_loss(chunk, 0.0);

  for (std::size_t base = 0; base < batch.size(); base += chunk) {
    std::size_t count = std::min(chunk, batch.size() - base);
    parallel_for(count, workers, [&](std::size_t k) {
      std::size_t i = base + k;
      thread_local Workspace ws;
      thread_local Architecture cached;
      if (!(cached == params.arch)) {
        ws.resize(params.arch);
        cached = params.arch;
      }
      forward_pass(params, batch[i], ws, true);
      EvalWithJacobian ev = extract_eval(ws);
      Vec dout(out_dim, 0.0);
      Mat djac(out_dim, n);
      slot_loss[k] = adjoint(i, ev, dout, djac);
      std::vector<Vec> djt(n, Vec(out_dim));
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t kk = 0; kk < out_dim; ++kk) djt[j][kk] = djac(kk, j);
      std::fill(slot[k].begin(), slot[k].end(), 0.0);
      backward_pass(params, ws, dout, djt, slot[k].data());
    });
    for (std::size_t k = 0; k < count; ++k) {
      result.loss += slot_loss[k];
      kernels::axpy(1.0, slot[k].data(), result.grad.data(), np);
    }
  }
  for (std::size_t i = 0; i < np; ++i)
    if (!std::isfinite(result.grad[i]))
      throw std::runtime_error("parameter_gradient: non-finite gradient entry " +
                               std::to_string(i));
  return result;
}

namespace {
constexpr char kMagic[9] = "QPCKPT01";
}

void save_checkpoint(const NetworkParams& params, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write(kMagic, 8);
  std::uint32_t version = 1;
  auto w = params.arch.widths();
  std::uint32_t nw = std::uint32_t(w.size());
  f.write(reinterpret_cast<const char*>(&version), 4);
  f.write(reinterpret_cast<const char*>(&nw), 4);
  for (std::size_t wi : w) {
    std::uint32_t v = std::uint32_t(wi);
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  f.write(reinterpret_cast<const char*>(&params.seed), 8);
  f.write(reinterpret_cast<const char*>(&params.trained_epochs), 8);
  std::uint64_t count = params.theta.size();
  f.write(reinterpret_cast<const char*>(&count), 8);
  f.write(reinterpret_cast<const char*>(params.theta.data()),
          std::streamsize(count * sizeof(double)));
  if (!f) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::uint32_t version = 0, nw = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1)
    throw std::runtime_error("load_checkpoint: unsupported version");
  f.read(reinterpret_cast<char*>(&nw), 4);
  if (!f || nw < 2 || nw > 64)
    throw std::runtime_error("load_checkpoint: corrupt architecture block");
  std::vector<std::size_t> w(nw);
  for (auto& wi : w) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (v == 0) throw std::runtime_error("load_checkpoint: zero-width layer");
    wi = v;
  }
  NetworkParams p;
  p.arch.input_dim = w.front();
  p.arch.output_dim = w.back();
  p.arch.hidden.assign(w.begin() + 1, w.end() - 1);
  f.read(reinterpret_cast<char*>(&p.seed), 8);
  f.read(reinterpret_cast<char*>(&p.trained_epochs), 8);
  std::uint64_t count = 0;
  f.read(reinterpret_cast<char*>(&count), 8);
  if (!f || count != NetworkParams::param_count(p.arch))
    throw std::runtime_error("load_checkpoint: parameter count mismatch");
  p.theta.resize(count);
  f.read(reinterpret_cast<char*>(p.theta.data()),
         std::streamsize(count * sizeof(double)));
  if (!f) throw std::runtime_error("load_checkpoint: truncated file");
  for (double v : p.theta)
    if (!std::isfinite(v))
      throw std::runtime_error("load_checkpoint: non-finite parameter");
  return p;
}

} // namespace qp
