#include "cpath/gradsuite.hpp"

#include <cmath>
#include <functional>

#include "cpath/contrastive.hpp"
#include "cpath/model.hpp"
#include "cpath/ops.hpp"
#include "cpath/rng.hpp"

namespace cpath::tg {

namespace {

// Keeps |x| away from kinks so central differences stay clean.
Tensor64 random_tensor(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0, double avoid = 0.0) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) {
    do {
      x = rng.uniform(lo, hi);
    } while (std::abs(x) < avoid);
  }
  return Tensor64::from(std::move(shape), std::move(v), true);
}

std::vector<double> random_weights(std::size_t n, RngStream& rng) {
  std::vector<double> w(n);
  for (auto& x : w) x = rng.uniform(-1.0, 1.0);
  return w;
}

// Reduces any output to a scalar with fixed random weights so every output
// element gets a distinct upstream gradient.
Tensor64 reduce(const Tensor64& y, const std::vector<double>& w) {
  return weighted_sum(y, std::span<const double>(w.data(), y.numel()));
}

Tensor64 leaky_relu_bug(const Tensor64& x) {
  std::vector<double> y(x.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(0.0, x[i]);
  return make_result<double>(x.shape(), std::move(y), {x}, "relu_corrupt", [](TensorImpl<double>& self) {
    auto& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += in.data[i] > 0 ? self.grad[i] : 0.1 * self.grad[i];
  });
}

}  // namespace

bool SuiteResult::passed() const {
  for (const auto& c : cases)
    if (!c.report.passed) return false;
  return !cases.empty();
}

SuiteResult check_ops(double tolerance, bool corrupt, std::uint64_t seed) {
  SuiteResult out;
  RngStream rng{seed, 0x6F7073ull};
  const auto w = random_weights(4096, rng);
  auto run = [&](const std::string& name, const std::function<Tensor64()>& f, std::vector<Tensor64> params) {
    out.cases.push_back({name, grad_check(f, std::move(params), tolerance)});
  };

  for (auto algo : {ConvAlgo::direct, ConvAlgo::im2col}) {
    for (int stride : {1, 2}) {
      auto x = random_tensor({2, 3, 5, 5}, rng);
      auto k = random_tensor({4, 3, 3, 3}, rng);
      auto b = random_tensor({4}, rng);
      const std::string name = std::string("conv2d/") + (algo == ConvAlgo::direct ? "direct" : "im2col") +
                               "/stride" + std::to_string(stride);
      run(name,
          [&, algo, stride] {
            const auto saved = conv_algo();
            set_conv_algo(algo);
            auto y = conv2d(x, k, b, stride, 1);
            set_conv_algo(saved);
            return reduce(y, w);
          },
          {x, k, b});
    }
  }
  {
    auto x = random_tensor({3, 7}, rng, -1.0, 1.0, 0.05);
    run("relu", [&] { return reduce(relu(x), w); }, {x});
  }
  {
    auto x = random_tensor({4, 5}, rng);
    auto wt = random_tensor({5, 3}, rng);
    auto b = random_tensor({3}, rng);
    run("linear", [&] { return reduce(linear(x, wt, b), w); }, {x, wt, b});
  }
  {
    auto x = random_tensor({2, 3, 4, 4}, rng);
    run("global_avg_pool", [&] { return reduce(global_avg_pool(x), w); }, {x});
  }
  {
    auto x = random_tensor({4, 6}, rng);
    run("l2_normalize", [&] { return reduce(l2_normalize(x, 1e-12), w); }, {x});
  }
  {
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({3, 4}, rng);
    run("add", [&] { return reduce(add(a, b), w); }, {a, b});
    run("mul", [&] { return reduce(mul(a, b), w); }, {a, b});
    run("scale", [&] { return reduce(scale(a, -1.7), w); }, {a});
    run("sum", [&] { return scale(sum(mul(a, a)), 0.5); }, {a});
    run("mean", [&] { return mean(mul(a, b)); }, {a, b});
  }
  {
    auto logits = random_tensor({5, 3}, rng, -2.0, 2.0);
    const std::vector<int> labels{0, 2, 1, 1, 0};
    run("softmax_cross_entropy", [&] { return softmax_cross_entropy(logits, std::span<const int>(labels)); },
        {logits});
  }
  {
    auto pred = random_tensor({6, 1}, rng);
    std::vector<double> target(6);
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double sign = i % 2 ? 1.0 : -1.0;
      target[i] = pred[i] + sign * rng.uniform(0.1, 0.5);
    }
    run("l1_loss", [&] { return l1_loss(pred, std::span<const double>(target)); }, {pred});
  }
  {
    auto z = random_tensor({6, 5}, rng);
    run("nt_xent",
        [&] {
          return contrastive::nt_xent(contrastive::ContrastiveBatch<double>::adjacent_pairs(l2_normalize(z, 1e-12), 0.1));
        },
        {z});
  }
  if (corrupt) {
    auto x = random_tensor({3, 7}, rng, -1.0, 1.0, 0.05);
    run("relu_corrupt", [&] { return reduce(leaky_relu_bug(x), w); }, {x});
  }
  return out;
}

SuiteResult check_pipeline(double tolerance, std::uint64_t seed) {
  model::EncoderConfig ec;
  ec.input_side = 8;
  ec.stage_channels = {4, 6};
  ec.blocks_per_stage = 2;
  model::ProjectionConfig pc;
  pc.hidden_dim = 5;
  pc.out_dim = 3;
  auto m = model::BasicModel<double>::init(ec, pc, seed);
  RngStream rng{seed, 0x706970ull};
  // zero biases would hide bias-gradient bugs
  for (auto& p : m.params())
    if (p.is_bias)
      for (auto& v : p.value.mutable_data()) v = rng.uniform(-0.1, 0.1);
  m.set_requires_grad(true);
  std::vector<double> pixels(4 * 3 * 8 * 8);
  for (auto& v : pixels) v = rng.uniform();
  const auto x = Tensor64::from({4, 3, 8, 8}, std::move(pixels));

  std::vector<Tensor64> params;
  std::vector<std::string> names;
  for (auto& p : m.params()) {
    params.push_back(p.value);
    names.push_back(p.name);
  }
  auto f = [&] {
    return contrastive::nt_xent(contrastive::ContrastiveBatch<double>::adjacent_pairs(m.project(m.encode(x)), 0.1));
  };
  SuiteResult out;
  out.cases.push_back({"encode->project->nt_xent", grad_check(f, params, tolerance, names)});
  return out;
}

}  // namespace cpath::tg
