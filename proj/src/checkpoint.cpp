#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cmsent/error.hpp"
#include "cmsent/neural.hpp"

namespace cmsent {

namespace {
constexpr char kMagic[8] = {'C', 'M', 'S', 'N', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(path.string() + ": truncated checkpoint");
  return v;
}
}  // namespace

void save_checkpoint(const ClassifierModel& model, const std::filesystem::path& path) {
  model.validate();
  nlohmann::ordered_json header;
  header["encoder"] = model.kind == EncoderKind::bilstm ? "bilstm" : "identity";
  header["input_dim"] = model.input_dim;
  header["units"] = model.lstm ? model.lstm->units : 0;
  header["dropout"] = {{"input_rate", model.dropout.input_rate}, {"recurrent_rate", model.dropout.recurrent_rate}};
  header["tensors"] = nlohmann::ordered_json::array();
  for (const auto& p : model.parameters()) {
    header["tensors"].push_back({{"name", p.name}, {"rows", p.value->rows()}, {"cols", p.value->cols()}});
  }
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : model.parameters()) {
    os.write(reinterpret_cast<const char*>(p.value->data()),
             static_cast<std::streamsize>(p.value->size() * static_cast<Eigen::Index>(sizeof(double))));
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

ClassifierModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + ": not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = get<std::uint64_t>(is, path);
  if (len > (1u << 24)) throw FormatError(path.string() + ": implausible header length");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError(path.string() + ": truncated header");

  ClassifierModel m;
  try {
    const auto header = nlohmann::json::parse(text);
    const std::string encoder = header.at("encoder");
    m.input_dim = header.at("input_dim");
    m.dropout.input_rate = header.at("dropout").at("input_rate");
    m.dropout.recurrent_rate = header.at("dropout").at("recurrent_rate");
    if (encoder == "bilstm") {
      m.kind = EncoderKind::bilstm;
      const int units = header.at("units");
      m.lstm = BiLSTMLayer::zeros(m.input_dim, units);
      m.head = DenseSoftmaxHead::zeros(2 * units);
    } else if (encoder == "identity") {
      m.kind = EncoderKind::identity;
      m.head = DenseSoftmaxHead::zeros(m.input_dim);
    } else {
      throw FormatError(path.string() + ": unknown encoder \"" + encoder + "\"");
    }
    const auto& tensors = header.at("tensors");
    auto params = m.parameters();
    if (tensors.size() != params.size()) throw FormatError(path.string() + ": tensor count mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (tensors[k].at("name") != params[k].name || tensors[k].at("rows") != params[k].value->rows() ||
          tensors[k].at("cols") != params[k].value->cols()) {
        throw FormatError(path.string() + ": tensor layout mismatch at " + params[k].name);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint header: " + e.what());
  }
  for (auto& p : m.parameters()) {
    if (!is.read(reinterpret_cast<char*>(p.value->data()),
                 static_cast<std::streamsize>(p.value->size() * static_cast<Eigen::Index>(sizeof(double))))) {
      throw FormatError(path.string() + ": truncated tensor " + p.name);
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes");
  m.validate();
  return m;
}

}  // namespace cmsent
