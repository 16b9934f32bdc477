#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotir/identifiers.hpp"
#include "rotir/neural.hpp"
#include "rotir/scenario.hpp"

// File formats. Signal payloads are raw little-endian float64 with JSON
// sidecars; grid and checkpoint files carry a single-line JSON header
// followed by the raw payload. WAV export is 32-bit IEEE float, for
// listening only.
namespace rotir::io {

using json = nlohmann::json;

void write_f64(const std::filesystem::path& path, std::span<const double> data);
std::vector<double> read_f64(const std::filesystem::path& path);

void write_wav_f32(const std::filesystem::path& path, std::span<const double> samples,
                   double sample_rate);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

// Round-trippable CSV cell for a double (17 significant digits).
std::string csv_double(double v);

// IR grid: one file, JSON header line + float64 payload in
// (azimuth, row, tap) order.
void write_ir_grid(const std::filesystem::path& path, const scenario::IRDatasetGrid& grid);
scenario::IRDatasetGrid read_ir_grid(const std::filesystem::path& path);

// Parameter checkpoint: JSON header line {layout, d, count, tensors} +
// float64 tensors in declared order.
void write_checkpoint(const std::filesystem::path& path, const neural::DnnParams& params);
neural::DnnParams read_checkpoint(const std::filesystem::path& path);

// Identification result: <stem>.json sidecar, <stem>.f64 snapshot payload
// and <stem>_etrace.csv with (n, e, ise) rows.
void write_result(const std::filesystem::path& dir, const std::string& stem,
                  const ident::IdentificationResult& result);
ident::IdentificationResult read_result(const std::filesystem::path& dir,
                                        const std::string& stem);

// Recording: <stem>.f64 + <stem>.json sidecar {N, sample_rate,
// noise_variance, snr_db, seed} (+ optional <stem>.wav).
void write_recording(const std::filesystem::path& dir, const std::string& stem,
                     const scenario::Recording& rec, double sample_rate, bool wav = true);
scenario::Recording read_recording(const std::filesystem::path& dir, const std::string& stem);

// Epoch log CSV: epoch, L_train, wall_time_s (wall time is timing, not part
// of the deterministic outputs).
void write_epoch_log(const std::filesystem::path& path,
                     std::span<const neural::EpochRecord> log);

}  // namespace rotir::io
