// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/viewer_server.hpp"

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace splat4d::server {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using json = nlohmann::json;

ViewRequest parse_view_request(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::nullopt, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ProtocolError(std::nullopt, "request must be a JSON object");
    }
    const auto id_it = j.find("id");
    if (id_it == j.end() || !id_it->is_number_integer() || id_it->get<std::int64_t>() < 0 ||
        id_it->get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max()) {
        throw ProtocolError(std::nullopt, "id must be an integer in [0, 2^32)");
    }
    ViewRequest req;
    req.id = static_cast<std::uint32_t>(id_it->get<std::int64_t>());
    auto fail = [&](const std::string& what) { throw ProtocolError(req.id, what); };

    if (j.value("type", std::string()) != "view") {
        fail("type must be \"view\"");
    }
    const auto time = j.find("time");
    if (time == j.end() || !time->is_number() || !std::isfinite(time->get<double>()) || time->get<double>() < 0.0) {
        fail("time must be a finite number >= 0");
    }
    req.time = time->get<double>();

    if (const auto mode = j.find("mode"); mode != j.end()) {
        if (!mode->is_string()) {
            fail("mode must be \"rgb\" or \"depth\"");
        }
        try {
            req.mode = parse_frame_mode(mode->get<std::string>());
        } catch (const DomainError& e) {
            fail(e.what());
        }
    }
    if (const auto scale = j.find("scale"); scale != j.end()) {
        const double s = scale->is_number() ? scale->get<double>() : 0.0;
        if (s != 1.0 && s != 0.5 && s != 0.25) {
            fail("scale must be 1, 0.5 or 0.25");
        }
        req.scale = s;
    }

    const auto pose = j.find("pose");
    if (pose == j.end() || !pose->is_object()) {
        fail("pose must be an object with q and t");
    }
    auto numbers = [&](const char* key, std::size_t n) {
        const auto it = pose->find(key);
        std::vector<double> v;
        if (it == pose->end() || !it->is_array() || it->size() != n) {
            fail(std::string("pose.") + key + " must be an array of " + std::to_string(n) + " numbers");
        }
        for (const auto& e : *it) {
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                fail(std::string("pose.") + key + " must contain finite numbers");
            }
            v.push_back(e.get<double>());
        }
        return v;
    };
    const auto q = numbers("q", 4);
    const auto t = numbers("t", 3);
    try {
        req.pose = Pose::from_wxyz(q[0], q[1], q[2], q[3], Vec3(t[0], t[1], t[2]));
    } catch (const DomainError& e) {
        fail(e.what());
    }
    return req;
}

std::string view_request_json(const ViewRequest& request) {
    const Vec4 q = request.pose.wxyz();
    const Vec3& t = request.pose.translation();
    json j = {{"type", "view"},
              {"id", request.id},
              {"time", request.time},
              {"mode", frame_mode_name(request.mode)},
              {"scale", request.scale},
              {"pose", {{"q", {q[0], q[1], q[2], q[3]}}, {"t", {t[0], t[1], t[2]}}}}};
    return j.dump();
}

io::Bytes frame_message(std::uint32_t id, const io::Bytes& png) {
    io::Bytes out(kFrameMagic.begin(), kFrameMagic.end());
    for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<std::uint8_t>(id >> (8 * b)));
    }
    out.insert(out.end(), png.begin(), png.end());
    return out;
}

std::string error_message(std::optional<std::uint32_t> id, std::string_view message) {
    json j = {{"type", "error"}, {"id", nullptr}, {"message", message}};
    if (id) {
        j["id"] = *id;
    }
    return j.dump();
}

std::string metadata_json(const FrameSource& source, const ServerOptions& options) {
    const CameraIntrinsics& K = source.intrinsics;
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    if (!source.splats.empty()) {
        lo = hi = source.splats.splats.front().mean;
        for (const Splat& s : source.splats.splats) {
            lo = lo.cwiseMin(s.mean);
            hi = hi.cwiseMax(s.mean);
        }
    }
    json objects = json::array();
    for (const auto& [id, m] : source.motion) {
        if (id != kStaticObject) {
            objects.push_back(id);
        }
    }
    json j = {
        {"convention", "RDF"},
        {"intrinsics",
         {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}}},
        {"bounds", {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}}},
        {"initial_pose", {{"q", {1.0, 0.0, 0.0, 0.0}}, {"t", {0.0, 0.0, 0.0}}}},
        {"max_time", options.max_time},
        {"modes", {"rgb", "depth"}},
        {"scales", {1.0, 0.5, 0.25}},
        {"objects", objects},
        {"frame_magic", kFrameMagic},
        {"depth_colormap", {{"name", "turbo"}, {"near", kDepthColormapNear}, {"far", kDepthColormapFar}}},
    };
    return j.dump();
}

namespace {

struct Shared {
    FrameSource source;
    ServerOptions options;
    std::string metadata;
};

class SocketSession;

struct SessionRegistry {
    std::mutex mutex;
    std::vector<std::weak_ptr<SocketSession>> sessions;
};

class SocketSession : public std::enable_shared_from_this<SocketSession> {
public:
    SocketSession(tcp::socket&& socket, std::shared_ptr<const Shared> shared)
        : ws_(std::move(socket)), shared_(std::move(shared)), executor_(ws_.get_executor()) {}

    ~SocketSession() { halt(); }

    template <class Request>
    void accept(Request req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&SocketSession::on_accept, shared_from_this()));
    }

    // Stops the render lane. Never called from the render thread.
    void halt() {
        {
            std::lock_guard lock(mutex_);
            closing_ = true;
        }
        cv_.notify_all();
        if (worker_.joinable()) {
            worker_.join();
        }
    }

private:
    struct Outgoing {
        bool binary = false;
        std::string payload;
    };

    void on_accept(beast::error_code ec) {
        if (ec) {
            return;
        }
        worker_ = std::thread([this] { work(); });
        do_read();
    }

    void do_read() {
        ws_.async_read(buffer_, beast::bind_front_handler(&SocketSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        if (!ws_.got_text()) {
            enqueue({false, error_message(std::nullopt, "requests must be text frames")});
        } else {
            try {
                ViewRequest req = parse_view_request(text);
                {
                    std::lock_guard lock(mutex_);
                    pending_ = req;  // latest wins
                }
                cv_.notify_one();
            } catch (const ProtocolError& e) {
                enqueue({false, error_message(e.id(), e.what())});
            }
        }
        do_read();
    }

    void enqueue(Outgoing out) {
        queue_.push_back(std::move(out));
        if (!writing_) {
            do_write();
        }
    }

    void do_write() {
        writing_ = true;
        ws_.binary(queue_.front().binary);
        ws_.async_write(net::buffer(queue_.front().payload),
                        beast::bind_front_handler(&SocketSession::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        queue_.pop_front();
        if (ec || queue_.empty()) {
            writing_ = false;
            return;
        }
        do_write();
    }

    void work() {
        const std::weak_ptr<SocketSession> weak = weak_from_this();
        for (;;) {
            ViewRequest req;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return closing_ || pending_.has_value(); });
                if (closing_) {
                    return;
                }
                req = *pending_;
                pending_.reset();
            }
            Outgoing out;
            try {
                const io::Bytes png = render_frame_png(shared_->source, req.pose, req.time, req.mode, req.scale,
                                                       shared_->options.render);
                const io::Bytes msg = frame_message(req.id, png);
                out = {true, std::string(msg.begin(), msg.end())};
            } catch (const std::exception& e) {
                out = {false, error_message(req.id, std::string("render failed: ") + e.what())};
            }
            net::post(executor_, [weak, out = std::move(out)]() mutable {
                if (auto self = weak.lock()) {
                    self->enqueue(std::move(out));
                }
            });
        }
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::shared_ptr<const Shared> shared_;
    net::any_io_executor executor_;

    // io thread only
    std::deque<Outgoing> queue_;
    bool writing_ = false;

    // shared with the render lane
    std::mutex mutex_;
    std::condition_variable cv_;
    std::optional<ViewRequest> pending_;
    bool closing_ = false;
    std::thread worker_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, std::shared_ptr<const Shared> shared, std::shared_ptr<SessionRegistry> registry)
        : stream_(std::move(socket)), shared_(std::move(shared)), registry_(std::move(registry)) {}

    void run() { net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this())); }

private:
    void do_read() {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec == http::error::end_of_stream) {
            stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
            return;
        }
        if (ec) {
            return;
        }
        const std::string target(req_.target().substr(0, req_.target().find('?')));
        if (websocket::is_upgrade(req_)) {
            if (target == kSocketPath) {
                stream_.expires_never();
                auto session = std::make_shared<SocketSession>(stream_.release_socket(), shared_);
                {
                    std::lock_guard lock(registry_->mutex);
                    std::erase_if(registry_->sessions, [](const auto& w) { return w.expired(); });
                    registry_->sessions.push_back(session);
                }
                session->accept(std::move(req_));
                return;
            }
            send(simple(http::status::not_found, "unknown socket path"));
            return;
        }
        if (target == kMetadataPath) {
            if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
                send(simple(http::status::method_not_allowed, "GET only"));
                return;
            }
            http::response<http::string_body> res{http::status::ok, req_.version()};
            res.set(http::field::content_type, "application/json");
            res.set(http::field::access_control_allow_origin, "*");
            res.body() = shared_->metadata;
            res.keep_alive(req_.keep_alive());
            res.prepare_payload();
            send(std::move(res));
            return;
        }
        send(simple(http::status::not_found, "not found"));
    }

    http::response<http::string_body> simple(http::status status, std::string body) {
        http::response<http::string_body> res{status, req_.version()};
        res.set(http::field::content_type, "text/plain");
        res.body() = std::move(body);
        res.keep_alive(req_.keep_alive());
        res.prepare_payload();
        return res;
    }

    void send(http::response<http::string_body> response) {
        auto res = std::make_shared<http::response<http::string_body>>(std::move(response));
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
            if (ec) {
                return;
            }
            if (res->need_eof()) {
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                return;
            }
            self->do_read();
        });
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    std::shared_ptr<const Shared> shared_;
    std::shared_ptr<SessionRegistry> registry_;
};

}  // namespace

class ViewerServer::Impl {
public:
    Impl(FrameSource source, ServerOptions options) : acceptor_(ioc_) {
        auto shared = std::make_shared<Shared>();
        shared->metadata = metadata_json(source, options);
        shared->source = std::move(source);
        shared->options = std::move(options);
        shared_ = std::move(shared);
    }

    ~Impl() { stop(); }

    std::uint16_t bind() {
        if (bound_) {
            return port_;
        }
        const auto address = net::ip::make_address(shared_->options.address);
        const tcp::endpoint endpoint(address, shared_->options.port);
        acceptor_.open(endpoint.protocol());
        acceptor_.set_option(net::socket_base::reuse_address(true));
        acceptor_.bind(endpoint);
        acceptor_.listen(net::socket_base::max_listen_connections);
        port_ = acceptor_.local_endpoint().port();
        bound_ = true;
        do_accept();
        return port_;
    }

    std::uint16_t start() {
        const std::uint16_t port = bind();
        thread_ = std::thread([this] { ioc_.run(); });
        return port;
    }

    void run() {
        bind();
        ioc_.run();
    }

    void stop() {
        ioc_.stop();
        if (thread_.joinable()) {
            thread_.join();
        }
        std::lock_guard lock(registry_->mutex);
        for (auto& weak : registry_->sessions) {
            if (auto session = weak.lock()) {
                session->halt();
            }
        }
        registry_->sessions.clear();
    }

    std::uint16_t port() const { return port_; }

private:
    void do_accept() {
        acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
            if (!ec) {
                std::make_shared<HttpSession>(std::move(socket), shared_, registry_)->run();
            }
            if (acceptor_.is_open()) {
                do_accept();
            }
        });
    }

    net::io_context ioc_{1};
    tcp::acceptor acceptor_;
    std::shared_ptr<const Shared> shared_;
    std::shared_ptr<SessionRegistry> registry_ = std::make_shared<SessionRegistry>();
    std::thread thread_;
    std::uint16_t port_ = 0;
    bool bound_ = false;
};

ViewerServer::ViewerServer(FrameSource source, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(source), std::move(options))) {}

ViewerServer::~ViewerServer() = default;

std::uint16_t ViewerServer::start() { return impl_->start(); }
void ViewerServer::run() { impl_->run(); }
void ViewerServer::stop() { impl_->stop(); }
std::uint16_t ViewerServer::port() const { return impl_->port(); }

}  // namespace splat4d::server
