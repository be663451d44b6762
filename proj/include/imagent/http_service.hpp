// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <imagent/backend.hpp>

#include <httplib.h>

namespace imagent
{

/// Registers the wire-protocol routes on `server`, answering every call with `backend`.
/// This is the reference server side of the protocol; the simulated world served this way is
/// what the HTTP client tests run against.
void serve_backend(httplib::Server& server, Backend& backend);

} // namespace imagent
