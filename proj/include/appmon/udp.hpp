// Copyright 2026 the appmon authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Minimal UDP sender/receiver, one message per datagram.

#ifndef APPMON_UDP_HPP
#define APPMON_UDP_HPP

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "appmon/packet.hpp"

namespace appmon {

struct SocketError : std::runtime_error {
    explicit SocketError(const std::string& what) : std::runtime_error(what) {}
};

// "host:port" -> sockaddr_in
inline sockaddr_in parse_endpoint(const std::string& address) {
    auto colon = address.rfind(':');
    if (colon == std::string::npos) throw SocketError("expected host:port, got " + address);
    std::string host = address.substr(0, colon);
    int port = std::stoi(address.substr(colon + 1));
    if (port < 0 || port > 65535) throw SocketError("bad port in " + address);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw SocketError("bad IPv4 address: " + host);
    return addr;
}

class UdpSender {
public:
    explicit UdpSender(const std::string& address)
        : dest_(parse_endpoint(address)), fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
        if (fd_ < 0) throw SocketError("cannot create UDP socket");
    }
    ~UdpSender() {
        if (fd_ >= 0) ::close(fd_);
    }
    UdpSender(const UdpSender&) = delete;
    UdpSender& operator=(const UdpSender&) = delete;

    bool send(std::span<const uint8_t> datagram) {
        ssize_t n = ::sendto(fd_, datagram.data(), datagram.size(), 0,
                             reinterpret_cast<const sockaddr*>(&dest_), sizeof(dest_));
        return n == static_cast<ssize_t>(datagram.size());
    }

private:
    sockaddr_in dest_;
    int fd_;
};

class UdpReceiver {
public:
    explicit UdpReceiver(const std::string& address) : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
        if (fd_ < 0) throw SocketError("cannot create UDP socket");
        sockaddr_in addr = parse_endpoint(address);
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        int rcvbuf = 4 * 1024 * 1024;  // absorb record bursts between poll rounds
        ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof(rcvbuf));
        if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
            ::close(fd_);
            throw SocketError("cannot bind " + address);
        }
    }
    ~UdpReceiver() {
        if (fd_ >= 0) ::close(fd_);
    }
    UdpReceiver(const UdpReceiver&) = delete;
    UdpReceiver& operator=(const UdpReceiver&) = delete;

    // Waits up to timeout_ms for one datagram; nullopt on timeout.
    std::optional<Bytes> receive(int timeout_ms) {
        timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
        fd_set set;
        FD_ZERO(&set);
        FD_SET(fd_, &set);
        int r = ::select(fd_ + 1, &set, nullptr, nullptr, &tv);
        if (r <= 0) return std::nullopt;
        Bytes buf(65536);
        ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0, nullptr, nullptr);
        if (n < 0) return std::nullopt;
        buf.resize(static_cast<size_t>(n));
        return buf;
    }

private:
    int fd_;
};

}  // namespace appmon

#endif  // APPMON_UDP_HPP
