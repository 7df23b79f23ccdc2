#include "hilsim/waveform_io.hpp"

#include "hilsim/error.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace hilsim {

namespace {

constexpr std::array<char, 4> kTableMagic{'S', 'L', 'C', '1'};
constexpr std::array<char, 4> kStreamMagic{'S', 'L', 'R', '1'};

template <class T>
void put_le(std::ostream& out, T value)
{
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const U bits = std::bit_cast<U>(value);
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
    }
    out.write(bytes, sizeof bytes);
}

template <class T>
T get_le(std::istream& in)
{
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    unsigned char bytes[sizeof(U)];
    in.read(reinterpret_cast<char*>(bytes), sizeof bytes);
    if (!in) {
        throw Error(ErrorCode::MalformedInput, "truncated binary file");
    }
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        bits |= static_cast<U>(bytes[i]) << (8 * i);
    }
    return std::bit_cast<T>(bits);
}

void append_number(std::string& line, double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    line.append(buf, ptr);
}

double parse_field(std::string_view s, std::size_t line_no)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::MalformedInput,
                    "line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
    }
    return v;
}

class CsvStreamWriter final : public StreamWriter {
public:
    explicit CsvStreamWriter(std::ostream& out) : out_(out) { out_ << stream_csv_header() << '\n'; }

    void write(const FrameBatch& frame) override
    {
        std::string line;
        for (std::size_t i = 0; i < frame.n; ++i) {
            line.clear();
            append_number(line, frame.time_of(i));
            line.push_back(',');
            append_number(line, frame.angle[i]);
            line.push_back(',');
            append_number(line, frame.crank[i]);
            line.push_back(',');
            append_number(line, frame.cam[i]);
            for (const auto& s : frame.sensors) {
                line.push_back(',');
                append_number(line, s[i]);
            }
            line.push_back('\n');
            out_.write(line.data(), static_cast<std::streamsize>(line.size()));
        }
    }

    void finish() override { out_.flush(); }

private:
    std::ostream& out_;
};

class RawStreamWriter final : public StreamWriter {
public:
    RawStreamWriter(std::ostream& out, double sample_rate) : out_(out)
    {
        out_.write(kStreamMagic.data(), kStreamMagic.size());
        put_le<std::uint32_t>(out_, kStreamChannels);
        put_le<double>(out_, sample_rate);
    }

    void write(const FrameBatch& frame) override
    {
        for (std::size_t i = 0; i < frame.n; ++i) {
            put_le<float>(out_, static_cast<float>(frame.time_of(i)));
            put_le<float>(out_, static_cast<float>(frame.angle[i]));
            put_le<float>(out_, static_cast<float>(frame.crank[i]));
            put_le<float>(out_, static_cast<float>(frame.cam[i]));
            for (const auto& s : frame.sensors) {
                put_le<float>(out_, static_cast<float>(s[i]));
            }
        }
    }

    void finish() override { out_.flush(); }

private:
    std::ostream& out_;
};

StreamRecording read_stream_binary(std::istream& in)
{
    StreamRecording rec;
    rec.channel_count = get_le<std::uint32_t>(in);
    if (rec.channel_count != kStreamChannels) {
        throw Error(ErrorCode::MalformedInput,
                    "unsupported channel count " + std::to_string(rec.channel_count));
    }
    rec.sample_rate = get_le<double>(in);
    if (!(rec.sample_rate > 0.0) || !std::isfinite(rec.sample_rate)) {
        throw Error(ErrorCode::MalformedInput, "invalid sample rate in header");
    }
    std::array<float, kStreamChannels> row{};
    while (true) {
        in.peek();
        if (in.eof()) {
            break;
        }
        for (auto& v : row) {
            v = get_le<float>(in);
        }
        rec.t.push_back(row[0]);
        rec.angle.push_back(row[1]);
        rec.crank.push_back(row[2]);
        rec.cam.push_back(row[3]);
        for (std::size_t s = 0; s < kSensorCount; ++s) {
            rec.sensors[s].push_back(row[4 + s]);
        }
    }
    return rec;
}

StreamRecording read_stream_csv(std::istream& in)
{
    StreamRecording rec;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    std::array<double, kStreamChannels> row{};
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header) {
            if (line != stream_csv_header()) {
                throw Error(ErrorCode::MalformedInput, "unexpected CSV header");
            }
            header = true;
            continue;
        }
        std::string_view rest(line);
        for (std::size_t c = 0; c < kStreamChannels; ++c) {
            auto comma = rest.find(',');
            if ((comma == std::string_view::npos) != (c + 1 == kStreamChannels)) {
                throw Error(ErrorCode::MalformedInput,
                            "line " + std::to_string(line_no) + ": expected 10 columns");
            }
            row[c] = parse_field(rest.substr(0, comma), line_no);
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        }
        rec.t.push_back(row[0]);
        rec.angle.push_back(row[1]);
        rec.crank.push_back(row[2]);
        rec.cam.push_back(row[3]);
        for (std::size_t s = 0; s < kSensorCount; ++s) {
            rec.sensors[s].push_back(row[4 + s]);
        }
    }
    if (!header) {
        throw Error(ErrorCode::MalformedInput, "empty input file");
    }
    if (rec.t.size() >= 2) {
        const double span = rec.t.back() - rec.t.front();
        if (!(span > 0.0)) {
            throw Error(ErrorCode::MalformedInput, "time column is not increasing");
        }
        rec.sample_rate = std::round(static_cast<double>(rec.t.size() - 1) / span);
    }
    return rec;
}

} // namespace

StreamFormat format_from_string(std::string_view text)
{
    if (text == "csv") return StreamFormat::csv;
    if (text == "bin" || text == "raw" || text == "raw-binary") return StreamFormat::raw_binary;
    throw Error(ErrorCode::InvalidArgument, "unknown format '" + std::string(text) + "'");
}

std::string stream_csv_header()
{
    std::string h = "t_s,angle_deg,crank_v,cam_v";
    for (SensorId id : kAllSensors) {
        h += ',';
        h += csv_column(id);
    }
    return h;
}

void write_table_csv(std::ostream& out, const WaveformTable& crank, const WaveformTable& cam)
{
    if (crank.size() != cam.size()) {
        throw Error(ErrorCode::InvalidArgument, "crank and cam tables differ in size");
    }
    out << "angle_deg,crank_v,cam_v\n";
    std::string line;
    for (std::size_t i = 0; i < crank.size(); ++i) {
        line.clear();
        append_number(line, crank.angle_of(i));
        line.push_back(',');
        append_number(line, crank[i]);
        line.push_back(',');
        append_number(line, cam[i]);
        line.push_back('\n');
        out << line;
    }
}

void write_table_binary(std::ostream& out, const WaveformTable& crank, const WaveformTable& cam)
{
    if (crank.size() != cam.size()) {
        throw Error(ErrorCode::InvalidArgument, "crank and cam tables differ in size");
    }
    out.write(kTableMagic.data(), kTableMagic.size());
    put_le<std::uint32_t>(out, 2);
    put_le<double>(out, crank.resolution());
    put_le<std::uint64_t>(out, crank.size());
    for (std::size_t i = 0; i < crank.size(); ++i) {
        put_le<float>(out, static_cast<float>(crank[i]));
        put_le<float>(out, static_cast<float>(cam[i]));
    }
}

TableFile read_table_binary(std::istream& in)
{
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kTableMagic) {
        throw Error(ErrorCode::MalformedInput, "not an SLC1 table file");
    }
    const auto channels = get_le<std::uint32_t>(in);
    if (channels != 2) {
        throw Error(ErrorCode::MalformedInput, "SLC1 table must have 2 channels");
    }
    TableFile file;
    file.resolution_deg = get_le<double>(in);
    const auto count = get_le<std::uint64_t>(in);
    file.crank.reserve(count);
    file.cam.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        file.crank.push_back(get_le<float>(in));
        file.cam.push_back(get_le<float>(in));
    }
    return file;
}

std::unique_ptr<StreamWriter> make_stream_writer(StreamFormat format, std::ostream& out, double sample_rate)
{
    if (format == StreamFormat::csv) {
        return std::make_unique<CsvStreamWriter>(out);
    }
    return std::make_unique<RawStreamWriter>(out, sample_rate);
}

std::vector<FrameBatch> StreamRecording::frames(std::size_t frame_size) const
{
    std::vector<FrameBatch> out;
    if (frame_size == 0) {
        throw Error(ErrorCode::InvalidArgument, "frame_size must be >= 1");
    }
    const std::size_t total = size();
    for (std::size_t start = 0, seq = 0; start < total; start += frame_size, ++seq) {
        const std::size_t n = std::min(frame_size, total - start);
        FrameBatch f;
        f.seq = seq;
        f.n = n;
        f.sample_rate = sample_rate;
        f.first_sample = start;
        f.t0 = static_cast<double>(start) / sample_rate;
        f.angle0 = CrankAngle(start == 0 ? 0.0 : angle[start - 1]);
        f.angle.assign(angle.begin() + static_cast<std::ptrdiff_t>(start), angle.begin() + static_cast<std::ptrdiff_t>(start + n));
        f.crank.assign(crank.begin() + static_cast<std::ptrdiff_t>(start), crank.begin() + static_cast<std::ptrdiff_t>(start + n));
        f.cam.assign(cam.begin() + static_cast<std::ptrdiff_t>(start), cam.begin() + static_cast<std::ptrdiff_t>(start + n));
        for (std::size_t s = 0; s < kSensorCount; ++s) {
            f.sensors[s].assign(sensors[s].begin() + static_cast<std::ptrdiff_t>(start),
                                sensors[s].begin() + static_cast<std::ptrdiff_t>(start + n));
        }
        out.push_back(std::move(f));
    }
    return out;
}

StreamRecording read_stream(std::istream& in)
{
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    const auto got = in.gcount();
    if (got == 0) {
        throw Error(ErrorCode::MalformedInput, "empty input file");
    }
    if (got == 4 && magic == kStreamMagic) {
        return read_stream_binary(in);
    }
    in.clear();
    in.seekg(0);
    return read_stream_csv(in);
}

StreamRecording read_stream(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    }
    return read_stream(in);
}

std::uint64_t export_waveform(Runtime& runtime, double duration_s, StreamFormat format,
                              const std::filesystem::path& path)
{
    if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) {
        throw Error(ErrorCode::InvalidArgument, "duration must be >= 0");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    }
    const double rate = runtime.config().sample_rate;
    const auto total = static_cast<std::uint64_t>(std::llround(duration_s * rate));
    auto writer = make_stream_writer(format, out, rate);
    const std::size_t frame_size = runtime.config().frame_size;
    std::uint64_t written = 0;
    while (written < total) {
        const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(frame_size, total - written));
        writer->write(runtime.step(n));
        written += n;
    }
    writer->finish();
    if (!out) {
        throw Error(ErrorCode::IoError, "write to '" + path.string() + "' failed");
    }
    return written;
}

} // namespace hilsim
