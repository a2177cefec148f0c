#include "gabornet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace gabornet {

namespace {

constexpr char kMagic[5] = {'G', 'N', 'E', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  bool done() const { return pos_ == bytes_.size(); }

  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointErrorCode::kTruncated,
                            "checkpoint " + path_.string() + " truncated while reading " + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<std::uint8_t>(bytes_[pos_++])} << (8 * i);
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(bytes_[pos_++])} << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

NamedTensor scalar_record(std::string name, double v) {
  return NamedTensor{std::move(name), {1}, {v}};
}

NamedTensor tensor_record(std::string name, const Tensor4& t) {
  const Shape4& s = t.shape();
  return NamedTensor{std::move(name),
                     {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                      static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)},
                     t.values()};
}

NamedTensor bytes_record(std::string name, const std::string& bytes) {
  NamedTensor r{std::move(name), {static_cast<std::uint32_t>(bytes.size())}, {}};
  for (unsigned char ch : bytes) r.values.push_back(ch);
  return r;
}

std::string record_bytes(const NamedTensor& r) {
  std::string s;
  for (double v : r.values) s.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  return s;
}

using RecordMap = std::map<std::string, const NamedTensor*>;

const NamedTensor& find(const RecordMap& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) {
    throw CheckpointError(CheckpointErrorCode::kMissingTensor,
                          "checkpoint has no tensor named '" + name + "'");
  }
  return *it->second;
}

void assign(const RecordMap& m, const std::string& name, Tensor4& into) {
  const NamedTensor& r = find(m, name);
  const Shape4& s = into.shape();
  const std::vector<std::uint32_t> expected = {
      static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
      static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
  if (r.dims != expected) {
    std::ostringstream got;
    for (std::size_t i = 0; i < r.dims.size(); ++i) got << (i ? "," : "") << r.dims[i];
    throw CheckpointError(CheckpointErrorCode::kShapeMismatch,
                          "tensor '" + name + "' has shape (" + got.str() +
                              ") in checkpoint but " + s.str() + " in the network");
  }
  into.values() = r.values;
}

TrainingState state_from(const RecordMap& m) {
  TrainingState st;
  if (auto it = m.find("meta.epoch"); it != m.end()) st.epoch = static_cast<int>(it->second->values.at(0));
  if (auto it = m.find("meta.config"); it != m.end()) st.config_text = record_bytes(*it->second);
  if (auto it = m.find("meta.class_names"); it != m.end()) {
    std::stringstream ss(record_bytes(*it->second));
    std::string name;
    while (std::getline(ss, name)) st.class_names.push_back(name);
  }
  auto mean = m.find("data.norm_mean");
  auto std_dev = m.find("data.norm_std");
  if (mean != m.end() && std_dev != m.end()) {
    st.normalization = NormStats{mean->second->values, std_dev->second->values};
  }
  return st;
}

}  // namespace

void write_records(const std::filesystem::path& path, const std::vector<NamedTensor>& records) {
  std::string out(kMagic, sizeof(kMagic));
  for (const NamedTensor& r : records) {
    put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    out.push_back(static_cast<char>(r.dims.size()));
    std::size_t count = 1;
    for (std::uint32_t d : r.dims) {
      put_u32(out, d);
      count *= d;
    }
    if (count != r.values.size()) {
      throw std::invalid_argument("checkpoint record '" + r.name + "' payload does not match dims");
    }
    for (double v : r.values) put_f64(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError(CheckpointErrorCode::kIo, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError(CheckpointErrorCode::kIo, "write failed for " + path.string());
}

std::vector<NamedTensor> read_records(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointErrorCode::kIo, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic)) {
    throw CheckpointError(CheckpointErrorCode::kTruncated,
                          "checkpoint " + path.string() + " is shorter than its magic");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(CheckpointErrorCode::kBadMagic,
                          path.string() + " is not a GNET1 checkpoint");
  }
  const std::string body = bytes.substr(sizeof(kMagic));
  Reader rd(body, path);
  std::vector<NamedTensor> records;
  while (!rd.done()) {
    NamedTensor r;
    r.name = rd.str(rd.u32("name length"), "name");
    const int rank = rd.u8("rank");
    std::size_t count = 1;
    for (int i = 0; i < rank; ++i) {
      r.dims.push_back(rd.u32("dims"));
      count *= r.dims.back();
    }
    rd.need(count * 8, "payload");
    r.values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) r.values.push_back(rd.f64("payload"));
    records.push_back(std::move(r));
  }
  return records;
}

void save_checkpoint(const std::filesystem::path& path, Network& net, const Optimizer* optimizer,
                     const TrainingState& state) {
  std::vector<NamedTensor> records;
  records.push_back(scalar_record("meta.epoch", state.epoch));
  if (!state.config_text.empty()) records.push_back(bytes_record("meta.config", state.config_text));
  if (!state.class_names.empty()) {
    std::string joined;
    for (const auto& n : state.class_names) joined += n + "\n";
    records.push_back(bytes_record("meta.class_names", joined));
  }
  if (state.normalization) {
    const auto& ns = *state.normalization;
    const auto c = static_cast<std::uint32_t>(ns.mean.size());
    records.push_back(NamedTensor{"data.norm_mean", {c}, ns.mean});
    records.push_back(NamedTensor{"data.norm_std", {c}, ns.std});
  }
  const auto params = net.parameters();
  for (const Parameter& p : params) records.push_back(tensor_record(p.name, *p.value));
  if (const auto* adam = dynamic_cast<const Adam*>(optimizer); adam && !adam->states().empty()) {
    const auto& states = adam->states();
    for (std::size_t i = 0; i < params.size(); ++i) {
      records.push_back(tensor_record("adam." + params[i].name + ".m", states[i].m));
      records.push_back(tensor_record("adam." + params[i].name + ".v", states[i].v));
      records.push_back(scalar_record("adam." + params[i].name + ".t",
                                      static_cast<double>(states[i].t)));
    }
  }
  write_records(path, records);
}

TrainingState load_checkpoint(const std::filesystem::path& path, Network& net,
                              Optimizer* optimizer) {
  const std::vector<NamedTensor> records = read_records(path);
  RecordMap m;
  for (const auto& r : records) m[r.name] = &r;
  const auto params = net.parameters();
  for (const Parameter& p : params) assign(m, p.name, *p.value);
  if (auto* adam = dynamic_cast<Adam*>(optimizer)) {
    adam->states().clear();
    if (!params.empty() && m.count("adam." + params.front().name + ".m")) {
      for (const Parameter& p : params) {
        AdamState st{Tensor4(p.value->shape()), Tensor4(p.value->shape()), 0};
        assign(m, "adam." + p.name + ".m", st.m);
        assign(m, "adam." + p.name + ".v", st.v);
        st.t = static_cast<std::int64_t>(find(m, "adam." + p.name + ".t").values.at(0));
        adam->states().push_back(std::move(st));
      }
    }
  }
  return state_from(m);
}

TrainingState read_checkpoint_state(const std::filesystem::path& path) {
  const std::vector<NamedTensor> records = read_records(path);
  RecordMap m;
  for (const auto& r : records) m[r.name] = &r;
  return state_from(m);
}

}  // namespace gabornet
