#include "spaloc/model.hpp"

#include <cstring>
#include <fstream>

namespace spaloc {

void ModelConfig::validate() const {
  if (depth < 1) throw InvariantError("depth must be >= 1");
  if (breadth < 1 || breadth > kMaxArity) throw InvariantError("breadth must be in [1, 4]");
  if (hidden < 1) throw InvariantError("hidden must be >= 1");
  if (eps < 0 || eps >= 1) throw InvariantError("eps must be in [0, 1)");
  if (lambda < 0) throw InvariantError("lambda must be >= 0");
  if (static_cast<int>(input_channels.size()) != breadth + 1)
    throw InvariantError("input_channels needs one entry per arity 0..breadth");
  for (int c : input_channels)
    if (c < 0) throw InvariantError("negative input width");
  if (output_arity < 0 || output_arity > breadth) throw InvariantError("output arity outside [0, breadth]");
  if (output_channels < 1) throw InvariantError("output_channels must be >= 1");
}

namespace {

constexpr char kMagic[8] = {'S', 'P', 'A', 'L', 'O', 'C', '1', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("truncated checkpoint");
  return v;
}

void put_param(std::ostream& os, const Parameter<float>& p) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
  os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.rows()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.cols()));
  os.write(reinterpret_cast<const char*>(p.value.data()),
           static_cast<std::streamsize>(sizeof(float) * p.value.size()));
}

void get_param(std::istream& is, Parameter<float>& p) {
  const auto len = get<std::uint32_t>(is);
  std::string name(len, '\0');
  if (!is.read(name.data(), len)) throw std::runtime_error("truncated checkpoint");
  const auto rows = get<std::uint32_t>(is);
  const auto cols = get<std::uint32_t>(is);
  if (name != p.name || static_cast<Index>(rows) != p.rows() || static_cast<Index>(cols) != p.cols())
    throw std::runtime_error("checkpoint parameter '" + name + "' does not match model layout");
  if (!is.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(sizeof(float) * p.value.size())))
    throw std::runtime_error("truncated checkpoint");
}

}  // namespace

void save_checkpoint(const Model<float>& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  const auto& c = model.config();
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::int32_t>(os, c.depth);
  put<std::int32_t>(os, c.breadth);
  put<std::int32_t>(os, c.hidden);
  put<double>(os, c.eps);
  put<double>(os, c.lambda);
  put<std::int32_t>(os, c.output_arity);
  put<std::int32_t>(os, c.output_channels);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.input_channels.size()));
  for (int w : c.input_channels) put<std::int32_t>(os, w);
  const auto params = model.parameters();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) put_param(os, *p);
  if (!os) throw std::runtime_error("failed writing checkpoint " + path);
}

Model<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a SPALOC1 checkpoint: " + path);
  if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("unsupported checkpoint version");
  ModelConfig c;
  c.depth = get<std::int32_t>(is);
  c.breadth = get<std::int32_t>(is);
  c.hidden = get<std::int32_t>(is);
  c.eps = get<double>(is);
  c.lambda = get<double>(is);
  c.output_arity = get<std::int32_t>(is);
  c.output_channels = get<std::int32_t>(is);
  const auto nin = get<std::uint32_t>(is);
  if (nin > kMaxArity + 1) throw std::runtime_error("corrupt checkpoint config");
  c.input_channels.resize(nin);
  for (auto& w : c.input_channels) w = get<std::int32_t>(is);
  Model<float> model(c, 0);
  auto params = model.parameters();
  if (get<std::uint32_t>(is) != params.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (auto* p : params) get_param(is, *p);
  return model;
}

}  // namespace spaloc
