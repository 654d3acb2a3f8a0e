#include "mbda/util.hpp"

#include <ctime>
#include <exception>
#include <fstream>
#include <iterator>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

namespace mbda {

std::optional<Instant> parse_utc(const std::string& text, const std::string& format) {
  std::tm tm{};
  const char* end = ::strptime(text.c_str(), format.c_str(), &tm);
  if (end == nullptr || *end != '\0') return std::nullopt;
  return Instant{std::chrono::seconds{::timegm(&tm)}};
}

namespace {

std::tm to_tm(Instant t) {
  std::time_t tt = t.time_since_epoch().count();
  std::tm tm{};
  ::gmtime_r(&tt, &tm);
  return tm;
}

std::string strftime_utc(Instant t, const char* fmt) {
  std::tm tm = to_tm(t);
  char buf[64];
  auto n = std::strftime(buf, sizeof buf, fmt, &tm);
  return std::string(buf, n);
}

}  // namespace

std::string format_iso8601(Instant t) { return strftime_utc(t, "%Y-%m-%dT%H:%M:%SZ"); }

Instant bin_start(Instant t, std::int64_t bin_width_seconds) {
  auto s = t.time_since_epoch().count();
  auto r = s % bin_width_seconds;
  if (r < 0) r += bin_width_seconds;
  return Instant{std::chrono::seconds{s - r}};
}

std::string bin_label(Instant t, std::int64_t bin_width_seconds) {
  Instant start = bin_start(t, bin_width_seconds);
  if (bin_width_seconds % kSecondsPerDay == 0) return strftime_utc(start, "%Y-%m-%d");
  return format_iso8601(start);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw DataError("read failure on " + path);
  return data;
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("write failure on " + path);
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  std::size_t count = std::min(workers, n);
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mbda
