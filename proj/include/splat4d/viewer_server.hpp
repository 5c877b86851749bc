// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
// Interactive render service. Protocol (also in docs/formats.md):
//
//   GET /api/metadata   JSON: intrinsics, scene bounds, initial pose, max time, convention
//   GET /ws             WebSocket. Client sends text frames
//                         {"type":"view","id":7,"time":0.5,"mode":"rgb","scale":1,
//                          "pose":{"q":[w,x,y,z],"t":[x,y,z]}}
//                       and receives binary frames "F4D1" | u32 id (LE) | PNG bytes,
//                       or text frames {"type":"error","id":7,"message":"..."}.
//
// Requests on one connection are coalesced: while a frame renders, newer requests replace
// older pending ones and only the newest is rendered next.
#pragma once

#include "splat4d/camera.hpp"
#include "splat4d/error.hpp"
#include "splat4d/frames.hpp"
#include "splat4d/rasterizer.hpp"
#include "splat4d/scene_io.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace splat4d::server {

inline constexpr std::string_view kFrameMagic = "F4D1";
inline constexpr std::string_view kMetadataPath = "/api/metadata";
inline constexpr std::string_view kSocketPath = "/ws";

struct ViewRequest {
    std::uint32_t id = 0;
    double time = 0.0;
    FrameMode mode = FrameMode::Rgb;
    double scale = 1.0;
    Pose pose;
};

/// Malformed client message. Carries the request id when it could be read.
class ProtocolError : public Error {
public:
    ProtocolError(std::optional<std::uint32_t> id, const std::string& what) : Error(what), id_(id) {}
    std::optional<std::uint32_t> id() const { return id_; }

private:
    std::optional<std::uint32_t> id_;
};

ViewRequest parse_view_request(std::string_view text);
std::string view_request_json(const ViewRequest& request);

/// "F4D1" | u32 id little-endian | png.
io::Bytes frame_message(std::uint32_t id, const io::Bytes& png);
std::string error_message(std::optional<std::uint32_t> id, std::string_view message);

struct ServerOptions {
    std::string address = "127.0.0.1";
    std::uint16_t port = 8080;  ///< 0 picks a free port
    double max_time = 10.0;     ///< seconds, advertised to clients
    RenderSettings render;
};

std::string metadata_json(const FrameSource& source, const ServerOptions& options);

class ViewerServer {
public:
    ViewerServer(FrameSource source, ServerOptions options);
    ~ViewerServer();
    ViewerServer(const ViewerServer&) = delete;
    ViewerServer& operator=(const ViewerServer&) = delete;

    /// Binds and starts serving on a background thread. Returns the bound port.
    std::uint16_t start();
    /// Serves on the calling thread until stop() is called.
    void run();
    void stop();

    std::uint16_t port() const;

private:
    class Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace splat4d::server
