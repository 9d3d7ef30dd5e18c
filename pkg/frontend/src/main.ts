import { startApp } from "./app.js";

window.addEventListener("DOMContentLoaded", () => {
  const root = document.getElementById("root");
  if (root) startApp(root);
});
