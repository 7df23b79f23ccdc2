#pragma once

// File formats for waveform tables and sample streams.
//
// Table CSV:    header `angle_deg,crank_v,cam_v`, one row per stored sample.
// Table binary: "SLC1", u32 channel count, f64 resolution_deg, u64 sample count,
//               interleaved f32 samples (crank, cam). Little-endian.
// Stream CSV:   header `t_s,angle_deg,crank_v,cam_v,throttle_v,oil_p_v,boost_p_v,rail_p_v,
//               coolant_t_v,boost_t_v`.
// Stream binary: "SLR1", u32 channel count, f64 sample_rate, interleaved f32 frames in the
//               stream CSV column order. Little-endian.

#include "hilsim/runtime.hpp"
#include "hilsim/signal_core.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace hilsim {

enum class StreamFormat { csv, raw_binary };

StreamFormat format_from_string(std::string_view text);

inline constexpr std::uint32_t kStreamChannels = 10;

/// Stream CSV header line (without newline).
std::string stream_csv_header();

void write_table_csv(std::ostream& out, const WaveformTable& crank, const WaveformTable& cam);
void write_table_binary(std::ostream& out, const WaveformTable& crank, const WaveformTable& cam);

struct TableFile {
    double resolution_deg = 0.0;
    std::vector<float> crank;
    std::vector<float> cam;
};

/// Reads an SLC1 file.
TableFile read_table_binary(std::istream& in);

/// Incremental writer for runtime output.
class StreamWriter {
public:
    virtual ~StreamWriter() = default;
    virtual void write(const FrameBatch& frame) = 0;
    virtual void finish() {}
};

std::unique_ptr<StreamWriter> make_stream_writer(StreamFormat format, std::ostream& out, double sample_rate);

/// Sample stream loaded back from disk; columns follow the stream CSV order.
struct StreamRecording {
    double sample_rate = 0.0;
    std::uint32_t channel_count = kStreamChannels;
    std::vector<double> t;
    std::vector<double> angle;
    std::vector<double> crank;
    std::vector<double> cam;
    std::array<std::vector<double>, kSensorCount> sensors;

    [[nodiscard]] std::size_t size() const { return crank.size(); }
    /// Splits the recording into consecutive frames.
    [[nodiscard]] std::vector<FrameBatch> frames(std::size_t frame_size) const;
};

/// Detects the format from the first bytes. Throws MalformedInput or IoError.
StreamRecording read_stream(const std::filesystem::path& path);
StreamRecording read_stream(std::istream& in);

/// Runs the runtime for round(duration * sample_rate) samples and writes them to `path`.
/// Returns the number of samples written. Throws IoError for an unwritable destination.
std::uint64_t export_waveform(Runtime& runtime, double duration_s, StreamFormat format,
                              const std::filesystem::path& path);

} // namespace hilsim
