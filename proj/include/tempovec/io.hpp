#pragma once

// Binary I/O primitives: little-endian encoding, CRC32-framed append-only
// logs, and atomic whole-file replacement.
//
// Framed log format, repeated per record:
//
//   [u32 payload_len][payload bytes][u32 crc32(payload)]
//
// All integers little-endian. A file that ends mid-frame is a torn write
// from a crash and is truncated on recovery; a complete frame whose CRC
// does not match is corruption and raises CorruptLogError.

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include "tempovec/types.hpp"

namespace tempovec::io {

// --- little-endian scalar encoding -----------------------------------------

inline void put_u8(std::string& out, std::uint8_t v) {
    out.push_back(static_cast<char>(v));
}

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_i64(std::string& out, std::int64_t v) {
    put_u64(out, static_cast<std::uint64_t>(v));
}

inline void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u32(out, bits);
}

inline void put_string(std::string& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s.data(), s.size());
}

// Cursor over an encoded buffer. Throws CorruptLogError on underrun so a
// truncated payload inside a CRC-valid frame is still reported as corruption.
class Reader {
public:
    Reader(std::string_view buf, std::uint64_t base_offset = 0)
        : buf_(buf), base_(base_offset) {}

    std::uint8_t get_u8() {
        need(1);
        std::uint8_t v = byte(pos_);
        ++pos_;
        return v;
    }

    std::uint16_t get_u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i)
            v |= static_cast<std::uint16_t>(byte(pos_ + i)) << (8 * i);
        pos_ += 2;
        return v;
    }

    std::uint32_t get_u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(byte(pos_ + i)) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t get_u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(byte(pos_ + i)) << (8 * i);
        pos_ += 8;
        return v;
    }

    std::int64_t get_i64() { return static_cast<std::int64_t>(get_u64()); }

    float get_f32() {
        std::uint32_t bits = get_u32();
        float v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }

    std::string get_string() {
        std::uint32_t n = get_u32();
        need(n);
        std::string s(buf_.substr(pos_, n));
        pos_ += n;
        return s;
    }

    bool at_end() const { return pos_ == buf_.size(); }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    unsigned char byte(std::size_t i) const {
        return static_cast<unsigned char>(buf_[i]);
    }

    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n)
            throw CorruptLogError("record payload truncated", base_ + pos_);
    }

    std::string_view buf_;
    std::uint64_t base_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32(std::string_view data) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(data.data()),
                static_cast<uInt>(data.size())));
}

// --- low-level file helpers -------------------------------------------------

inline void throw_errno(const std::string& what) {
    throw IoError(what + ": " + std::strerror(errno));
}

// RAII file descriptor.
class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            close();
            fd_ = o.fd_;
            o.fd_ = -1;
        }
        return *this;
    }
    ~Fd() { close(); }

    int get() const { return fd_; }
    bool valid() const { return fd_ >= 0; }

    void close() {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_ = -1;
};

inline Fd open_fd(const std::filesystem::path& path, int flags, mode_t mode = 0644) {
    int fd = ::open(path.c_str(), flags, mode);
    if (fd < 0)
        throw_errno("open " + path.string());
    return Fd(fd);
}

inline void fsync_fd(const Fd& fd, const std::string& what) {
    if (::fsync(fd.get()) != 0)
        throw_errno("fsync " + what);
}

inline void fsync_dir(const std::filesystem::path& dir) {
    Fd fd = open_fd(dir, O_RDONLY | O_DIRECTORY);
    fsync_fd(fd, dir.string());
}

inline void write_all(const Fd& fd, std::string_view data, const std::string& what) {
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
        ssize_t n = ::write(fd.get(), p, left);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw_errno("write " + what);
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    Fd fd = open_fd(path, O_RDONLY);
    std::string out;
    char buf[1 << 16];
    for (;;) {
        ssize_t n = ::read(fd.get(), buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw_errno("read " + path.string());
        }
        if (n == 0)
            break;
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

// Writes content to a temp file in the same directory, fsyncs it, renames
// over the target, then fsyncs the directory. Readers see either the old
// file or the new one, never a partial write.
inline void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path dir = path.parent_path();
    if (dir.empty())
        dir = ".";
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        Fd fd = open_fd(tmp, O_WRONLY | O_CREAT | O_TRUNC);
        write_all(fd, content, tmp.string());
        fsync_fd(fd, tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoError("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
    fsync_dir(dir);
}

// --- framed append-only log --------------------------------------------------

struct Frame {
    std::uint64_t offset;  // byte offset of the length prefix
    std::string payload;
};

// Appends CRC-framed records with fsync-on-append durability.
class FramedWriter {
public:
    FramedWriter() = default;

    explicit FramedWriter(const std::filesystem::path& path)
        : path_(path), fd_(open_fd(path, O_WRONLY | O_CREAT | O_APPEND)) {
        struct stat st{};
        if (::fstat(fd_.get(), &st) != 0)
            throw_errno("fstat " + path.string());
        size_ = static_cast<std::uint64_t>(st.st_size);
    }

    // Returns the byte offset at which the frame was written.
    std::uint64_t append(std::string_view payload, bool sync = true) {
        std::string frame;
        frame.reserve(payload.size() + 8);
        put_u32(frame, static_cast<std::uint32_t>(payload.size()));
        frame.append(payload.data(), payload.size());
        put_u32(frame, crc32(payload));
        write_all(fd_, frame, path_.string());
        std::uint64_t at = size_;
        size_ += frame.size();
        if (sync)
            fsync_fd(fd_, path_.string());
        return at;
    }

    void sync() { fsync_fd(fd_, path_.string()); }
    std::uint64_t size() const { return size_; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    Fd fd_;
    std::uint64_t size_ = 0;
};

struct ScanResult {
    std::vector<Frame> frames;
    std::uint64_t valid_size = 0;   // bytes covered by complete, CRC-valid frames
    bool torn_tail = false;         // file ended inside a claimed frame
};

// Reads every complete frame, verifying CRCs. A short tail is reported via
// torn_tail; a CRC mismatch on a complete frame throws CorruptLogError with
// the offending frame's byte offset.
inline ScanResult scan_framed_log(std::string_view data) {
    ScanResult result;
    std::uint64_t pos = 0;
    while (pos < data.size()) {
        if (data.size() - pos < 4) {
            result.torn_tail = true;
            break;
        }
        std::uint32_t len = 0;
        for (int i = 0; i < 4; ++i)
            len |= static_cast<std::uint32_t>(
                       static_cast<unsigned char>(data[pos + i]))
                   << (8 * i);
        if (data.size() - pos < 8ull + len) {
            result.torn_tail = true;
            break;
        }
        std::string_view payload = data.substr(pos + 4, len);
        std::uint32_t stored = 0;
        for (int i = 0; i < 4; ++i)
            stored |= static_cast<std::uint32_t>(
                          static_cast<unsigned char>(data[pos + 4 + len + i]))
                      << (8 * i);
        if (stored != crc32(payload))
            throw CorruptLogError("frame checksum mismatch", pos);
        result.frames.push_back(Frame{pos, std::string(payload)});
        pos += 8ull + len;
        result.valid_size = pos;
    }
    return result;
}

inline ScanResult scan_framed_log_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        return {};
    return scan_framed_log(read_file(path));
}

// Drops a torn tail left by a crash mid-append. Returns the recovered frames.
inline ScanResult recover_framed_log(const std::filesystem::path& path) {
    ScanResult result = scan_framed_log_file(path);
    if (result.torn_tail) {
        std::filesystem::resize_file(path, result.valid_size);
        Fd fd = open_fd(path, O_WRONLY);
        fsync_fd(fd, path.string());
        result.torn_tail = false;
    }
    return result;
}

// --- advisory file lock -------------------------------------------------------

// Holds an exclusive flock on a lock file for the lifetime of the object.
// Non-blocking: a second writer fails fast instead of queueing.
class FileLock {
public:
    FileLock() = default;

    explicit FileLock(const std::filesystem::path& path)
        : path_(path), fd_(open_fd(path, O_WRONLY | O_CREAT)) {
        if (::flock(fd_.get(), LOCK_EX | LOCK_NB) != 0) {
            if (errno == EWOULDBLOCK)
                throw LockError("store is locked by another process: " + path.string());
            throw_errno("flock " + path.string());
        }
    }

    FileLock(FileLock&&) = default;
    FileLock& operator=(FileLock&&) = default;

    bool held() const { return fd_.valid(); }
    void release() { fd_.close(); }

private:
    std::filesystem::path path_;
    Fd fd_;
};

}  // namespace tempovec::io
