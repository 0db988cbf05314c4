#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "evdn/autodiff.hpp"
#include "evdn/graph_builder.hpp"

namespace evdn {

inline constexpr std::size_t kQuantityCount = 7;

/// Message quantities, in column order of the quantity matrix:
/// Q1 dx, Q2 dy, Q3 dt, Q4 std x, Q5 std y, Q6 std t, Q7 euclidean distance.
enum class Quantity : std::uint8_t { dx = 0, dy, dt, std_x, std_y, std_t, distance };

class QuantitySet {
 public:
  QuantitySet() = default;
  explicit QuantitySet(std::uint8_t mask);

  /// "3q" | "4q" | "6q" | "7q", or a custom list such as "1,2,5".
  static QuantitySet parse(const std::string& spec);
  static QuantitySet variant3() { return QuantitySet(0b0000111); }
  static QuantitySet variant4() { return QuantitySet(0b1000111); }
  static QuantitySet variant6() { return QuantitySet(0b0111111); }
  static QuantitySet variant7() { return QuantitySet(0b1111111); }

  bool contains(Quantity q) const { return (mask_ >> static_cast<int>(q)) & 1u; }
  std::size_t count() const;
  std::vector<std::size_t> indices() const;  // ascending quantity indices (0-based)
  std::uint8_t mask() const { return mask_; }
  /// Anything other than the four named variants.
  bool experimental() const;
  std::string to_string() const;

  friend bool operator==(const QuantitySet&, const QuantitySet&) = default;

 private:
  std::uint8_t mask_ = 0b1111111;
};

/// Reference point for the difference quantities Q1-Q3 and Q7.
enum class MessageReference { mean, interest };

MessageReference parse_message_reference(const std::string& name);
std::string to_string(MessageReference ref);

struct GraphMeans {
  double x = 0.0;
  double y = 0.0;
  double t = 0.0;
};

GraphMeans compute_means(const NormalizedGraph& g);

/// m x 7 matrix of per-node quantities (rows follow g.nodes order).
ad::Tensor compute_quantities(const NormalizedGraph& g, const GraphMeans& means,
                              MessageReference ref = MessageReference::mean);

/// Same quantities recorded on a tape from an m x 3 node-feature matrix, so gradients
/// reach the node features.
ad::Var quantities_on_tape(ad::Var nodes, MessageReference ref = MessageReference::mean);

/// Affine + sigmoid parameters per selected quantity. Entries are indices into a
/// ParameterSet; unselected quantities have no parameters.
struct EventConvParams {
  std::size_t width = 4;
  std::array<std::optional<std::size_t>, kQuantityCount> weight{};
  std::array<std::optional<std::size_t>, kQuantityCount> bias{};

  static EventConvParams create(ad::ParameterSet& params, const QuantitySet& selector,
                                std::size_t width, std::mt19937_64& rng);
  static EventConvParams bind(const ad::ParameterSet& params, const QuantitySet& selector,
                              std::size_t width);
};

std::string eventconv_weight_name(std::size_t quantity);
std::string eventconv_bias_name(std::size_t quantity);

/// h[k*width + c] = sum_j sigmoid(w_k[c] * Q[j,k] + b_k[c]) over selected k, quantity-major.
/// Output is 1 x (q*width).
ad::Var eventconv_forward(ad::Tape& tape, ad::Var quantities, const QuantitySet& selector,
                          const EventConvParams& conv, ad::ParameterSet& params);

/// Plain evaluation of the same map into `out` (length q*width).
void eventconv_values(const ad::Tensor& quantities, const QuantitySet& selector,
                      const EventConvParams& conv, const ad::ParameterSet& params,
                      std::span<double> out);

}  // namespace evdn
