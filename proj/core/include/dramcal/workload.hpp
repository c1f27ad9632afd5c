#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dramcal {

enum class RequestType : std::uint8_t { Read, Write };

struct Request {
    RequestType type = RequestType::Read;
    std::uint64_t address = 0;

    bool operator==(const Request&) const = default;
};

struct ArrayAccess {
    unsigned array = 0;  // 0 = a, 1 = b, 2 = c, ...
    RequestType type = RequestType::Read;

    bool operator==(const ArrayAccess&) const = default;
};

using AccessPattern = std::vector<ArrayAccess>;

enum class KernelKind { Read, Assign, Scale, Addition, Triad, Copy, SelfScale };
inline constexpr KernelKind kAllKernels[] = {KernelKind::Read,  KernelKind::Assign, KernelKind::Scale,
                                             KernelKind::Addition, KernelKind::Triad, KernelKind::Copy,
                                             KernelKind::SelfScale};

std::string_view kernel_name(KernelKind k);  // lower case, e.g. "selfscale"
std::optional<KernelKind> kernel_from_name(std::string_view name);
AccessPattern access_pattern(KernelKind k);

// Read-for-ownership: each write to an array not already read in the same
// iteration is preceded by a read of that line.
AccessPattern with_rfo(const AccessPattern& pattern);

inline constexpr std::uint64_t kElementBytes = 8;
inline constexpr std::uint64_t kLineBytes = 64;

struct StreamParams {
    AccessPattern pattern;
    std::uint64_t array_len = 0;  // elements per array
    std::uint64_t stride = kLineBytes;
    std::vector<std::uint64_t> bases;  // one per array referenced by pattern
};

// Array bases placed back to back from `start`, each rounded up to 64 bytes.
std::vector<std::uint64_t> contiguous_bases(unsigned arrays, std::uint64_t array_len, std::uint64_t start = 0);
unsigned array_count(const AccessPattern& pattern);

// Lazily evaluated request sequence; request i is computed on demand so the
// stream never has to be materialized.
class RequestStream {
public:
    // Throws AlignmentError / OverlapError / ValidationError.
    explicit RequestStream(StreamParams params);

    const StreamParams& params() const { return params_; }
    std::uint64_t iterations() const { return iterations_; }
    std::uint64_t size() const { return iterations_ * params_.pattern.size(); }
    Request operator[](std::uint64_t i) const;

    class const_iterator {
    public:
        using iterator_category = std::input_iterator_tag;
        using value_type = Request;
        using difference_type = std::ptrdiff_t;
        using pointer = void;
        using reference = Request;

        const_iterator() = default;
        const_iterator(const RequestStream* s, std::uint64_t i) : stream_(s), index_(i) {}
        Request operator*() const { return (*stream_)[index_]; }
        const_iterator& operator++() {
            ++index_;
            return *this;
        }
        const_iterator operator++(int) {
            auto t = *this;
            ++index_;
            return t;
        }
        bool operator==(const const_iterator& o) const { return index_ == o.index_; }

    private:
        const RequestStream* stream_ = nullptr;
        std::uint64_t index_ = 0;
    };

    const_iterator begin() const { return {this, 0}; }
    const_iterator end() const { return {this, size()}; }

private:
    StreamParams params_;
    std::uint64_t iterations_ = 0;
};

RequestStream generate(KernelKind kind, std::uint64_t array_len, std::vector<std::uint64_t> bases = {},
                       std::uint64_t stride = kLineBytes, bool rfo = false);

// CSV `type,address` with header; addresses written as hex.
void write_stream_csv(std::ostream& os, const RequestStream& stream, std::string_view comment = {});
std::vector<Request> parse_stream_csv(std::string_view text, const std::string& source_name = "<string>");

}  // namespace dramcal
