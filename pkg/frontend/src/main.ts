import { bootstrap } from "./app.js";

bootstrap(document.getElementById("app")!);
