#pragma once

#include <functional>

#include "voiceloop/service.hpp"

namespace httplib {
class Server;
}

namespace voiceloop {

void install_routes(httplib::Server& server, VoiceService& service);

/// Blocks until the server stops. `on_ready` receives the bound port.
int run_server(VoiceService& service, const std::function<void(int)>& on_ready = {});

}  // namespace voiceloop
