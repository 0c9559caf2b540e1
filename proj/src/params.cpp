#include "cri/params.hpp"

#include <cmath>
#include <cstring>

#include "cri/errors.hpp"

namespace cri {

void GeneratorParams::add_block(std::string name, std::vector<int> shape,
                                std::span<const double> values) {
  std::size_t expected = 1;
  for (int d : shape) expected *= static_cast<std::size_t>(d);
  if (expected != values.size()) throw ShapeMismatchError("block '" + name + "' size/shape mismatch");
  BlockInfo info{std::move(name), std::move(shape), values_.size(), values.size()};
  values_.insert(values_.end(), values.begin(), values.end());
  layout_.push_back(std::move(info));
}

const GeneratorParams::BlockInfo& GeneratorParams::info(std::string_view name) const {
  for (const auto& b : layout_) {
    if (b.name == name) return b;
  }
  throw Error("no parameter block named '" + std::string(name) + "'");
}

std::span<double> GeneratorParams::block(std::string_view name) {
  const auto& b = info(name);
  return {values_.data() + b.offset, b.size};
}

std::span<const double> GeneratorParams::block(std::string_view name) const {
  const auto& b = info(name);
  return {values_.data() + b.offset, b.size};
}

GeneratorParams GeneratorParams::zeros_like() const {
  GeneratorParams out;
  out.layout_ = layout_;
  out.values_.assign(values_.size(), 0.0);
  return out;
}

double GeneratorParams::distance(const GeneratorParams& other) const {
  if (!same_layout(other)) throw ShapeMismatchError("parameter layouts differ");
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double d = values_[i] - other.values_[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::uint64_t GeneratorParams::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values_) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace cri
