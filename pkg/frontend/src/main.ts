import { SessionApi } from "./api.js";
import { apiBaseFromLocation, createApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const app = createApp(root, new SessionApi(apiBaseFromLocation()));
  void app.route();
}
