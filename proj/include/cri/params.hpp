#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cri {

// Named parameter blocks stored back to back in one flat buffer. The flat
// view is what optimizers and gradient checks walk over.
class GeneratorParams {
 public:
  struct BlockInfo {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;

    bool operator==(const BlockInfo&) const = default;
  };

  void add_block(std::string name, std::vector<int> shape, std::span<const double> values);

  const std::vector<BlockInfo>& layout() const { return layout_; }
  std::span<double> block(std::string_view name);
  std::span<const double> block(std::string_view name) const;
  const BlockInfo& info(std::string_view name) const;

  std::size_t size() const { return values_.size(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_layout(const GeneratorParams& other) const { return layout_ == other.layout_; }
  GeneratorParams zeros_like() const;
  double distance(const GeneratorParams& other) const;
  // FNV-1a over the raw bytes of every value.
  std::uint64_t hash() const;

  bool operator==(const GeneratorParams&) const = default;

 private:
  std::vector<BlockInfo> layout_;
  std::vector<double> values_;
};

}  // namespace cri
