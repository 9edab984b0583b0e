#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "evade/rng.hpp"

namespace evade::nn {

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  int size() const { return channels * height * width; }
  bool operator==(const Shape&) const = default;
};

/// Layer descriptor. Conv layers use stride 1 and same-padding so the 5x5
/// spatial extent survives the whole stack; Dense flattens its input.
struct LayerSpec {
  enum class Kind { Conv, Elu, Dense };
  Kind kind = Kind::Elu;
  int units = 0;   // Conv: output channels, Dense: output units
  int kernel = 0;  // Conv only, odd

  bool operator==(const LayerSpec&) const = default;
};

struct ArchitectureDescriptor {
  Shape input;
  std::vector<LayerSpec> layers;

  /// Full-size value network: 128-filter 5x5 conv, three 128-filter 3x3
  /// convs, a 1x1 conv, dense 256, linear scalar output; ELU throughout.
  static ArchitectureDescriptor paper_preset();
  /// Reduced widths for CPU-scale experiments: 16/16/16/1 convs + dense 32.
  static ArchitectureDescriptor desk_preset();
  /// Single affine map over a flat input (tabular/linear value functions).
  static ArchitectureDescriptor linear(int inputs);

  std::string to_json() const;
  static ArchitectureDescriptor from_json(const std::string& text);
  void validate() const;

  bool operator==(const ArchitectureDescriptor&) const = default;
};

/// Mutable view of one layer's parameters and their gradient accumulator.
struct ParamBlock {
  double* values = nullptr;
  double* grads = nullptr;
  std::size_t size = 0;
};

class Layer;

/// Feed-forward scalar-output network with explicit per-sample
/// forward/backward passes. Activations are kept in reusable buffers, so a
/// backward pass always refers to the most recent forward.
class Network {
 public:
  explicit Network(ArchitectureDescriptor descriptor);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  ~Network();

  /// Fan-in scaled uniform weights, zero biases, drawn layer by layer.
  void init_params(Rng& rng);

  double forward(std::span<const double> input) const;
  void zero_grad();
  /// Accumulates parameter gradients for the last forward pass.
  void backward(double dloss_dout);

  std::vector<ParamBlock> param_blocks();
  std::size_t param_count() const;
  void copy_params_from(const Network& other);
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> values);

  /// Smallest |pre-activation| seen by any ELU in the last forward pass;
  /// used to keep finite-difference probes away from the kink.
  double min_abs_preactivation() const;

  const ArchitectureDescriptor& descriptor() const { return descriptor_; }
  Shape output_shape() const;

 private:
  void build();

  ArchitectureDescriptor descriptor_;
  std::vector<std::unique_ptr<Layer>> layers_;
  mutable std::vector<std::vector<double>> acts_;   // acts_[i] = input of layer i
  std::vector<std::vector<double>> grads_;          // matching activation grads
};

/// Max relative error between analytic and central finite-difference
/// gradients of the scalar output w.r.t. parameters. `per_block` caps how
/// many evenly spaced parameters are probed per layer block (0 = all).
double gradient_check(Network& net, std::span<const double> input,
                      double perturbation = 1e-5, int per_block = 32);

/// Convenience: seeded dense input redrawn until every ELU pre-activation is
/// clear of the kink, then gradient_check.
double gradient_check_seeded(Network& net, Rng& rng, double perturbation = 1e-5,
                             int per_block = 32);

}  // namespace evade::nn
