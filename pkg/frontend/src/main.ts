import { ApiClient } from "./api";
import { createApp } from "./app";

const app = createApp(document, new ApiClient(""));
void app.refreshList().then((demos) => {
  const first = demos[0];
  if (first) void app.selectDemo(first.id);
});
