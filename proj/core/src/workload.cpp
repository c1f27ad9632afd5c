#include "dramcal/workload.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <ostream>

#include "dramcal/error.hpp"
#include "dramcal/text_io.hpp"

namespace dramcal {

namespace {

constexpr const char* kStage = "workload-gen";
constexpr auto R = RequestType::Read;
constexpr auto W = RequestType::Write;

}  // namespace

std::string_view kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::Read: return "read";
        case KernelKind::Assign: return "assign";
        case KernelKind::Scale: return "scale";
        case KernelKind::Addition: return "addition";
        case KernelKind::Triad: return "triad";
        case KernelKind::Copy: return "copy";
        case KernelKind::SelfScale: return "selfscale";
    }
    return "?";
}

std::optional<KernelKind> kernel_from_name(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (auto k : kAllKernels) {
        if (kernel_name(k) == lower) return k;
    }
    return std::nullopt;
}

AccessPattern access_pattern(KernelKind k) {
    switch (k) {
        case KernelKind::Read: return {{0, R}};                      // sum += a[j]
        case KernelKind::Assign: return {{0, W}};                    // a[j] = 2
        case KernelKind::Scale: return {{0, R}, {1, W}};             // b[j] = 2 * a[j]
        case KernelKind::Addition: return {{0, R}, {1, R}, {2, W}};  // c[j] = a[j] + b[j]
        case KernelKind::Triad: return {{1, R}, {0, R}, {0, W}};     // a[j] = b[j] + 2 * a[j]
        case KernelKind::Copy: return {{0, R}, {1, W}};              // b[j] = a[j]
        case KernelKind::SelfScale: return {{0, R}, {0, W}};         // a[j] = 2 * a[j]
    }
    return {};
}

AccessPattern with_rfo(const AccessPattern& pattern) {
    AccessPattern out;
    std::vector<unsigned> read_so_far;
    for (const auto& acc : pattern) {
        const bool already = std::find(read_so_far.begin(), read_so_far.end(), acc.array) != read_so_far.end();
        if (acc.type == W && !already) {
            out.push_back({acc.array, R});
            read_so_far.push_back(acc.array);
        }
        if (acc.type == R) read_so_far.push_back(acc.array);
        out.push_back(acc);
    }
    return out;
}

unsigned array_count(const AccessPattern& pattern) {
    unsigned n = 0;
    for (const auto& a : pattern) n = std::max(n, a.array + 1);
    return n;
}

std::vector<std::uint64_t> contiguous_bases(unsigned arrays, std::uint64_t array_len, std::uint64_t start) {
    const auto bytes = array_len * kElementBytes;
    const auto span = (bytes + kLineBytes - 1) / kLineBytes * kLineBytes;
    std::vector<std::uint64_t> bases(arrays);
    for (unsigned i = 0; i < arrays; ++i) bases[i] = start + i * span;
    return bases;
}

RequestStream::RequestStream(StreamParams params) : params_(std::move(params)) {
    auto& p = params_;
    if (p.pattern.empty()) throw ValidationError(kStage, "empty access pattern");
    if (p.stride == 0 || p.stride % kLineBytes != 0)
        throw AlignmentError(kStage, "stride must be a positive multiple of " + std::to_string(kLineBytes) + " bytes");
    const auto bytes = p.array_len * kElementBytes;
    if (p.array_len == 0 || bytes % p.stride != 0)
        throw AlignmentError(kStage, "array_len * 8 bytes must be a non-zero multiple of the stride");
    const unsigned arrays = array_count(p.pattern);
    if (p.bases.empty()) p.bases = contiguous_bases(arrays, p.array_len);
    if (p.bases.size() < arrays)
        throw ValidationError(kStage, "pattern references " + std::to_string(arrays) + " arrays but " +
                                          std::to_string(p.bases.size()) + " bases were given");
    for (unsigned i = 0; i < arrays; ++i) {
        if (p.bases[i] % kLineBytes != 0)
            throw AlignmentError(kStage, "array " + std::to_string(i) + " base is not 64-byte aligned");
        for (unsigned j = 0; j < i; ++j) {
            const auto lo = std::max(p.bases[i], p.bases[j]);
            const auto hi = std::min(p.bases[i] + bytes, p.bases[j] + bytes);
            if (lo < hi)
                throw OverlapError(kStage, "arrays " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
        }
    }
    iterations_ = bytes / p.stride;
}

Request RequestStream::operator[](std::uint64_t i) const {
    const auto n = params_.pattern.size();
    const auto iter = i / n;
    const auto& acc = params_.pattern[i % n];
    return {acc.type, params_.bases[acc.array] + iter * params_.stride};
}

RequestStream generate(KernelKind kind, std::uint64_t array_len, std::vector<std::uint64_t> bases, std::uint64_t stride,
                       bool rfo) {
    auto pattern = access_pattern(kind);
    if (rfo) pattern = with_rfo(pattern);
    return RequestStream(StreamParams{std::move(pattern), array_len, stride, std::move(bases)});
}

void write_stream_csv(std::ostream& os, const RequestStream& stream, std::string_view comment) {
    if (!comment.empty()) os << "# " << comment << "\n";
    os << "type,address\n";
    char buf[48];
    for (const auto r : stream) {
        const int n = std::snprintf(buf, sizeof(buf), "%s,0x%llx\n", r.type == R ? "READ" : "WRITE",
                                    static_cast<unsigned long long>(r.address));
        os.write(buf, n);
    }
}

std::vector<Request> parse_stream_csv(std::string_view text_in, const std::string& source) {
    std::vector<Request> out;
    text::LineReader reader(text_in);
    std::string_view line;
    bool header_checked = false;
    while (reader.next(line)) {
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        if (!header_checked) {
            header_checked = true;
            if (line == "type,address") continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string_view::npos) throw ParseError(kStage, source, reader.line_number(), "expected type,address");
        const auto type = text::trim(line.substr(0, comma));
        Request r;
        if (type == "READ") r.type = R;
        else if (type == "WRITE") r.type = W;
        else throw ParseError(kStage, source, reader.line_number(), "unknown request type '" + std::string(type) + "'");
        if (!text::parse_u64(line.substr(comma + 1), r.address))
            throw ParseError(kStage, source, reader.line_number(), "bad address");
        out.push_back(r);
    }
    return out;
}

}  // namespace dramcal
