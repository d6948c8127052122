#include "pacsac/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace pacsac::nets {

namespace {

constexpr char kMagic[8] = {'P', 'A', 'C', 'S', 'A', 'C', 'C', 'K'};

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
  return v;
}

void put_u64(std::ostream& os, std::uint64_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return to_little(v);
}

void put_double(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

double get_double(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

void write_checkpoint(const std::filesystem::path& path, std::span<const NamedArray> arrays) {
  nlohmann::json header;
  header["version"] = 1;
  header["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    header["arrays"].push_back({{"name", a.name}, {"shape", {a.value.rows(), a.value.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(a.value.size()) * sizeof(double);
  }
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof kMagic);
  put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays) {
    for (Eigen::Index i = 0; i < a.value.size(); ++i) put_double(os, a.value.data()[i]);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

void write_checkpoint(const std::filesystem::path& path, std::span<diff::Parameter* const> params) {
  std::vector<NamedArray> arrays;
  arrays.reserve(params.size());
  for (const auto* p : params) arrays.push_back({p->name, p->value});
  write_checkpoint(path, arrays);
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const std::uint64_t header_len = get_u64(is);
  std::string text(header_len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw std::runtime_error("truncated checkpoint header: " + path.string());
  const auto header = nlohmann::json::parse(text);
  const std::streamoff data_start = is.tellg();

  std::vector<NamedArray> out;
  for (const auto& entry : header.at("arrays")) {
    const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
    const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    NamedArray a{entry.at("name").get<std::string>(), Matrix(rows, cols)};
    is.seekg(data_start + static_cast<std::streamoff>(offset));
    for (Eigen::Index i = 0; i < a.value.size(); ++i) a.value.data()[i] = get_double(is);
    if (!is) throw std::runtime_error("truncated checkpoint data for " + a.name + ": " + path.string());
    out.push_back(std::move(a));
  }
  return out;
}

void load_checkpoint(const std::filesystem::path& path, std::span<diff::Parameter* const> params) {
  std::map<std::string, Matrix> by_name;
  for (auto& a : read_checkpoint(path)) by_name[a.name] = std::move(a.value);
  for (auto* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint lacks array " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw DimensionError("checkpoint array " + p->name + " has shape " + shape_string(it->second) +
                           ", expected " + shape_string(p->value));
    }
    p->value = it->second;
  }
}

}  // namespace pacsac::nets
