#include "adfilt/etrc.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "ETRC I/O assumes a little-endian host");

namespace adfilt::eeg {

namespace {

constexpr char kMagic[4] = {'E', 'T', 'R', 'C'};
constexpr std::uint16_t kVersion = 1;

class ByteReader {
public:
  ByteReader(std::vector<char> data, std::string source)
      : data_(std::move(data)), source_(std::move(source)) {}

  template <typename T>
  T read(const char* what) {
    static_assert(std::is_trivially_copyable_v<T>);
    if (pos_ + sizeof(T) > data_.size()) {
      throw FormatError(source_ + ": truncated while reading " + std::string(what), pos_);
    }
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void read_floats(float* dst, std::size_t n, const char* what) {
    if (pos_ + n * sizeof(float) > data_.size()) {
      throw FormatError(source_ + ": truncated while reading " + std::string(what), pos_);
    }
    std::memcpy(dst, data_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

private:
  std::vector<char> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

template <typename T>
void write_pod(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  const char* p = reinterpret_cast<const char*>(&v);
  out.append(p, sizeof(T));
}

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string format_float32(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const EegDataset& ds) {
  if (ds.trials.empty()) throw FormatError("refusing to save an empty dataset");
  ds.validate();
  const std::size_t c = ds.channels();
  const std::size_t t = ds.samples();
  if (c > 0xFFFF || ds.num_classes > 0xFFFF || t > 0xFFFFFFFFu) {
    throw FormatError("dataset dimensions exceed the ETRC field widths");
  }

  std::string out;
  out.reserve(18 + ds.size() * (4 + c * t * 4));
  out.append(kMagic, 4);
  write_pod<std::uint16_t>(out, kVersion);
  write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(c));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t));
  write_pod<float>(out, static_cast<float>(ds.fs()));
  write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(ds.num_classes));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ds.size()));
  for (const EegTrial& trial : ds.trials) {
    if (trial.label > 0xFFFF || trial.subject < 0 || trial.subject > 0xFFFF) {
      throw FormatError("trial label/subject exceeds the ETRC field widths");
    }
    write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(trial.label));
    write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(trial.subject));
    for (std::size_t i = 0; i < c * t; ++i) {
      write_pod<float>(out, static_cast<float>(trial.data[i]));
    }
  }
  atomic_write(path, out);
}

EegDataset load_dataset(const std::filesystem::path& path) {
  ByteReader r(slurp(path), path.string());
  char magic[4];
  for (char& ch : magic) ch = r.read<char>("magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad magic (not an ETRC file)", 0);
  }
  const auto version = r.read<std::uint16_t>("version");
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version), 4);
  }
  const auto c = r.read<std::uint16_t>("channel count");
  const auto t = r.read<std::uint32_t>("sample count");
  const auto fs = r.read<float>("sampling rate");
  const auto k = r.read<std::uint16_t>("class count");
  const auto n = r.read<std::uint32_t>("trial count");
  if (c == 0 || t == 0 || k == 0 || n == 0) {
    throw FormatError(path.string() + ": zero-sized header field", 6);
  }

  EegDataset ds;
  ds.num_classes = k;
  ds.name = path.stem().string();
  ds.trials.reserve(n);
  std::vector<float> buf(static_cast<std::size_t>(c) * t);
  for (std::uint32_t i = 0; i < n; ++i) {
    EegTrial trial;
    const std::size_t rec_off = r.pos();
    const auto label = r.read<std::uint16_t>("trial label");
    const auto subject = r.read<std::uint16_t>("trial subject");
    if (label >= k) {
      throw FormatError(path.string() + ": trial " + std::to_string(i) + " label " +
                            std::to_string(label) + " >= K=" + std::to_string(k),
                        rec_off);
    }
    r.read_floats(buf.data(), buf.size(), "trial samples");
    trial.label = label;
    trial.subject = subject;
    trial.fs = static_cast<double>(fs);
    trial.data = Tensor({c, t});
    for (std::size_t j = 0; j < buf.size(); ++j) trial.data[j] = static_cast<double>(buf[j]);
    ds.trials.push_back(std::move(trial));
  }
  if (r.remaining() != 0) {
    throw FormatError(path.string() + ": " + std::to_string(r.remaining()) +
                          " trailing bytes after the last trial",
                      r.pos());
  }
  ds.validate();
  return ds;
}

// ---- CSV ------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

EegDataset import_csv(const std::filesystem::path& directory, const std::string& manifest_name) {
  const auto manifest_path = directory / manifest_name;
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("cannot open manifest '" + manifest_path.string() + "'");

  std::string header;
  if (!std::getline(in, header)) {
    throw FormatError(manifest_path.string() + ": empty manifest", 0);
  }
  const auto cols = split_csv_line(header);
  std::map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < cols.size(); ++i) col_index[cols[i]] = i;
  for (const char* required : {"file", "label", "subject", "fs"}) {
    if (!col_index.count(required)) {
      throw FormatError(manifest_path.string() + ": missing manifest column '" +
                        std::string(required) + "'");
    }
  }

  EegDataset ds;
  ds.name = directory.filename().string();
  int max_label = -1;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < cols.size()) {
      throw FormatError(manifest_path.string() + ": line " + std::to_string(line_no) +
                        " has too few fields");
    }
    EegTrial trial;
    const std::string file = fields[col_index["file"]];
    try {
      trial.label = std::stoi(fields[col_index["label"]]);
      trial.subject = std::stoi(fields[col_index["subject"]]);
      trial.fs = std::stod(fields[col_index["fs"]]);
    } catch (const std::exception&) {
      throw FormatError(manifest_path.string() + ": line " + std::to_string(line_no) +
                        " has a non-numeric label/subject/fs field");
    }

    const auto trial_path = directory / file;
    std::ifstream tin(trial_path);
    if (!tin) throw FormatError("cannot open trial file '" + trial_path.string() + "'");
    std::vector<std::vector<double>> rows;
    std::string trow;
    while (std::getline(tin, trow)) {
      if (trow.empty()) continue;
      std::vector<double> vals;
      for (const auto& f : split_csv_line(trow)) {
        try {
          vals.push_back(std::stod(f));
        } catch (const std::exception&) {
          throw FormatError(trial_path.string() + ": non-numeric sample at row " +
                            std::to_string(rows.size() + 1));
        }
      }
      if (!rows.empty() && vals.size() != rows.front().size()) {
        throw FormatError(trial_path.string() + ": ragged row " + std::to_string(rows.size() + 1) +
                          " (expected " + std::to_string(rows.front().size()) + " samples)");
      }
      rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw FormatError(trial_path.string() + ": no samples");
    const std::size_t c = rows.size();
    const std::size_t t = rows.front().size();
    if (!ds.trials.empty() && (c != ds.channels() || t != ds.samples())) {
      throw FormatError(trial_path.string() + ": trial shape (" + std::to_string(c) + "," +
                        std::to_string(t) + ") differs from earlier trials (" +
                        std::to_string(ds.channels()) + "," + std::to_string(ds.samples()) + ")");
    }
    trial.data = Tensor({c, t});
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < t; ++j) trial.data.at(i, j) = rows[i][j];
    }
    max_label = std::max(max_label, trial.label);
    ds.trials.push_back(std::move(trial));
  }
  if (ds.trials.empty()) throw FormatError(manifest_path.string() + ": manifest lists no trials");
  ds.num_classes = max_label + 1;
  ds.validate();
  return ds;
}

void export_csv(const std::filesystem::path& directory, const EegDataset& ds,
                const std::string& manifest_name) {
  ds.validate();
  std::filesystem::create_directories(directory);
  std::string manifest = "file,label,subject,fs\n";
  // fs is formatted through float32 so an import matches the ETRC encoding
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const EegTrial& trial = ds.trials[i];
    char name[32];
    std::snprintf(name, sizeof(name), "trial_%05zu.csv", i);
    std::string body;
    for (std::size_t c = 0; c < trial.channels(); ++c) {
      for (std::size_t t = 0; t < trial.samples(); ++t) {
        if (t) body += ",";
        body += format_float32(static_cast<float>(trial.data.at(c, t)));
      }
      body += "\n";
    }
    atomic_write(directory / name, body);
    manifest += std::string(name) + "," + std::to_string(trial.label) + "," +
                std::to_string(trial.subject) + "," +
                format_float32(static_cast<float>(trial.fs)) + "\n";
  }
  atomic_write(directory / manifest_name, manifest);
}

}  // namespace adfilt::eeg
