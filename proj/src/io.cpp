#include "rotir/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rotir/errors.hpp"

namespace rotir::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw io_failure("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw io_failure("cannot open for reading: " + path.string());
  return in;
}

void write_payload(std::ofstream& out, std::span<const double> data,
                   const std::filesystem::path& path) {
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw io_failure("write failed: " + path.string());
}

std::vector<double> read_payload(std::ifstream& in, std::size_t count,
                                 const std::filesystem::path& path) {
  std::vector<double> data(count);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in || in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
    throw io_failure("short read: " + path.string());
  return data;
}

}  // namespace

void write_f64(const std::filesystem::path& path, std::span<const double> data) {
  auto out = open_out(path, true);
  write_payload(out, data, path);
}

std::vector<double> read_f64(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  if (bytes % sizeof(double) != 0)
    throw io_failure("payload size is not a multiple of 8: " + path.string());
  return read_payload(in, bytes / sizeof(double), path);
}

void write_wav_f32(const std::filesystem::path& path, std::span<const double> samples,
                   double sample_rate) {
  auto out = open_out(path, true);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 4);
  const std::uint32_t fmt_rate = static_cast<std::uint32_t>(sample_rate);

  auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto put_u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };

  out.write("RIFF", 4);
  put_u32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(3);  // IEEE float
  put_u16(1);  // mono
  put_u32(fmt_rate);
  put_u32(fmt_rate * 4);
  put_u16(4);
  put_u16(32);
  out.write("data", 4);
  put_u32(data_bytes);
  for (const double s : samples) {
    const float f = static_cast<float>(s);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
  if (!out) throw io_failure("write failed: " + path.string());
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path, false);
  out << j.dump(2) << '\n';
  if (!out) throw io_failure("write failed: " + path.string());
}

json read_json(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& ex) {
    throw io_failure("bad JSON in " + path.string() + ": " + ex.what());
  }
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path, false);
  out << text;
  if (!out) throw io_failure("write failed: " + path.string());
}

std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_ir_grid(const std::filesystem::path& path, const scenario::IRDatasetGrid& grid) {
  grid.validate();
  json header{{"type", "ir_grid"},
              {"azimuths_deg", grid.azimuths_deg},
              {"rows", grid.rows},
              {"taps", grid.taps},
              {"sample_rate", grid.sample_rate}};
  auto out = open_out(path, true);
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  write_payload(out, grid.irs, path);
}

scenario::IRDatasetGrid read_ir_grid(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  std::string line;
  if (!std::getline(in, line)) throw io_failure("missing header line: " + path.string());
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& ex) {
    throw io_failure("bad grid header in " + path.string() + ": " + ex.what());
  }
  if (header.value("type", "") != "ir_grid")
    throw io_failure("not an ir_grid file: " + path.string());

  scenario::IRDatasetGrid grid;
  grid.azimuths_deg = header.at("azimuths_deg").get<std::vector<double>>();
  grid.rows = header.at("rows").get<std::size_t>();
  grid.taps = header.at("taps").get<std::size_t>();
  grid.sample_rate = header.at("sample_rate").get<double>();
  grid.irs = read_payload(in, grid.azimuths_deg.size() * grid.rows * grid.taps, path);
  grid.validate();
  return grid;
}

void write_checkpoint(const std::filesystem::path& path, const neural::DnnParams& params) {
  std::vector<std::string> tensor_names;
  for (const auto name : neural::DnnParams::tensor_names())
    tensor_names.emplace_back(name);
  json header{{"type", "dnn_checkpoint"},
              {"layout", 1},
              {"d", params.dim},
              {"count", params.count()},
              {"tensors", tensor_names}};
  auto out = open_out(path, true);
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  for (auto member : neural::DnnParams::tensor_members())
    write_payload(out, params.*member, path);
}

neural::DnnParams read_checkpoint(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  std::string line;
  if (!std::getline(in, line)) throw io_failure("missing header line: " + path.string());
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& ex) {
    throw io_failure("bad checkpoint header in " + path.string() + ": " + ex.what());
  }
  if (header.value("type", "") != "dnn_checkpoint" || header.value("layout", 0) != 1)
    throw io_failure("unsupported checkpoint: " + path.string());

  const auto d = header.at("d").get<std::size_t>();
  neural::DnnParams params;
  params.resize_zero(d);
  for (auto member : neural::DnnParams::tensor_members()) {
    auto& tensor = params.*member;
    tensor = read_payload(in, tensor.size(), path);
  }
  if (params.count() != header.at("count").get<std::size_t>())
    throw io_failure("checkpoint count mismatch: " + path.string());
  return params;
}

void write_result(const std::filesystem::path& dir, const std::string& stem,
                  const ident::IdentificationResult& result) {
  json sidecar{{"type", "identification_result"},
               {"algo", result.algo},
               {"hyperparameters", result.hyperparameters},
               {"n_frames", result.n_frames},
               {"speakers", result.speakers},
               {"taps", result.taps},
               {"snapshot_index", result.snapshot_index},
               {"snapshot_azimuth_deg", result.snapshot_azimuth_deg},
               {"segment_starts", result.segment_starts},
               {"failures", result.failures}};
  write_json(dir / (stem + ".json"), sidecar);
  write_f64(dir / (stem + ".f64"), result.snapshots);

  std::ostringstream csv;
  csv << "n,e,ise\n";
  for (std::size_t n = 0; n < result.e_trace.size(); ++n) {
    const double e = result.e_trace[n];
    csv << n << ',' << csv_double(e) << ',' << csv_double(e * e) << '\n';
  }
  write_text(dir / (stem + "_etrace.csv"), csv.str());
}

ident::IdentificationResult read_result(const std::filesystem::path& dir,
                                        const std::string& stem) {
  const json sidecar = read_json(dir / (stem + ".json"));
  if (sidecar.value("type", "") != "identification_result")
    throw io_failure("not a result sidecar: " + (dir / (stem + ".json")).string());

  ident::IdentificationResult result;
  result.algo = sidecar.at("algo").get<std::string>();
  result.hyperparameters =
      sidecar.at("hyperparameters").get<std::map<std::string, double>>();
  result.n_frames = sidecar.at("n_frames").get<std::size_t>();
  result.speakers = sidecar.at("speakers").get<std::size_t>();
  result.taps = sidecar.at("taps").get<std::size_t>();
  result.snapshot_index = sidecar.at("snapshot_index").get<std::vector<std::size_t>>();
  result.snapshot_azimuth_deg =
      sidecar.at("snapshot_azimuth_deg").get<std::vector<double>>();
  result.segment_starts = sidecar.at("segment_starts").get<std::vector<std::size_t>>();
  result.failures = sidecar.at("failures").get<std::vector<std::string>>();
  result.snapshots = read_f64(dir / (stem + ".f64"));
  const std::size_t expected = result.snapshot_index.size() * result.speakers * result.taps;
  if (result.snapshots.size() != expected)
    throw io_failure("snapshot payload size mismatch: " + (dir / (stem + ".f64")).string());
  return result;
}

void write_recording(const std::filesystem::path& dir, const std::string& stem,
                     const scenario::Recording& rec, double sample_rate, bool wav) {
  json sidecar{{"type", "recording"},
               {"n_frames", rec.samples.size()},
               {"sample_rate", sample_rate},
               {"noise_variance", rec.noise_variance},
               {"seed", rec.seed}};
  if (rec.snr_db.has_value())
    sidecar["snr_db"] = *rec.snr_db;
  else
    sidecar["snr_db"] = nullptr;
  write_json(dir / (stem + ".json"), sidecar);
  write_f64(dir / (stem + ".f64"), rec.samples);
  if (wav) write_wav_f32(dir / (stem + ".wav"), rec.samples, sample_rate);
}

scenario::Recording read_recording(const std::filesystem::path& dir,
                                   const std::string& stem) {
  const json sidecar = read_json(dir / (stem + ".json"));
  if (sidecar.value("type", "") != "recording")
    throw io_failure("not a recording sidecar: " + (dir / (stem + ".json")).string());
  scenario::Recording rec;
  rec.samples = read_f64(dir / (stem + ".f64"));
  if (rec.samples.size() != sidecar.at("n_frames").get<std::size_t>())
    throw io_failure("recording payload size mismatch: " + (dir / (stem + ".f64")).string());
  rec.noise_variance = sidecar.at("noise_variance").get<double>();
  rec.seed = sidecar.at("seed").get<std::uint64_t>();
  if (!sidecar.at("snr_db").is_null()) rec.snr_db = sidecar.at("snr_db").get<double>();
  return rec;
}

void write_epoch_log(const std::filesystem::path& path,
                     std::span<const neural::EpochRecord> log) {
  std::ostringstream csv;
  csv << "epoch,L_train,wall_time_s\n";
  for (const auto& rec : log) {
    csv << rec.epoch << ',' << (rec.failed ? "nan" : csv_double(rec.l_train)) << ','
        << csv_double(rec.wall_seconds) << '\n';
  }
  write_text(path, csv.str());
}

}  // namespace rotir::io
