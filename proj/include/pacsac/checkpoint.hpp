#ifndef PACSAC_CHECKPOINT_HPP
#define PACSAC_CHECKPOINT_HPP

#include "pacsac/diffmath.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pacsac::nets {

struct NamedArray {
  std::string name;
  Matrix value;
};

// Layout:
//   bytes 0..7    magic "PACSACCK"
//   bytes 8..15   header length H, little-endian uint64
//   next H bytes  JSON {"version":1,"arrays":[{"name","shape":[r,c],"offset"}]}
//   remainder     row-major little-endian float64 data; offsets are bytes from
//                 the start of this section
void write_checkpoint(const std::filesystem::path& path, std::span<const NamedArray> arrays);
void write_checkpoint(const std::filesystem::path& path, std::span<diff::Parameter* const> params);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);
/// Copies values into `params`, matching by name; shapes must agree.
void load_checkpoint(const std::filesystem::path& path, std::span<diff::Parameter* const> params);

}  // namespace pacsac::nets

#endif  // PACSAC_CHECKPOINT_HPP
