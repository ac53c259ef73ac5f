import { GatewayApi } from "./api.js";
import { PortalApp } from "./app.js";
import { PortalController } from "./controller.js";
import { PortalSession } from "./session.js";

// Same-origin by default; override with ?gateway=http://host:port for a
// portal served separately from the gateway.
const params = new URLSearchParams(window.location.search);
const base = params.get("gateway") ?? "";

const api = new GatewayApi(base);
const session = new PortalSession(window.sessionStorage);
const controller = new PortalController(api, session);

new PortalApp(controller).start();
